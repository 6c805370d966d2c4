use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixels, top-left origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn is_valid(&self) -> bool {
        [self.x, self.y, self.w, self.h].iter().all(|v| v.is_finite()) && self.w > 0.0 && self.h > 0.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    /// Intersection with the image rectangle; `None` when nothing remains.
    pub fn clamp_to(&self, width: u32, height: u32) -> Option<BoundingBox> {
        let x0 = self.x.max(0.0);
        let y0 = self.y.max(0.0);
        let x1 = self.right().min(width as f64);
        let y1 = self.bottom().min(height as f64);
        (x1 > x0 && y1 > y0).then(|| BoundingBox::new(x0, y0, x1 - x0, y1 - y0))
    }

    /// Grows the box by `fraction` of its width/height on every side.
    pub fn padded(&self, fraction: f64) -> BoundingBox {
        let dx = self.w * fraction;
        let dy = self.h * fraction;
        BoundingBox::new(self.x - dx, self.y - dy, self.w + 2.0 * dx, self.h + 2.0 * dy)
    }

    /// Integer pixel rectangle `(x, y, w, h)` covering the box, clamped to
    /// the image. Always at least one pixel in each direction.
    pub fn pixel_rect(&self, width: u32, height: u32) -> (u32, u32, u32, u32) {
        let x0 = (self.x.floor().max(0.0) as u32).min(width.saturating_sub(1));
        let y0 = (self.y.floor().max(0.0) as u32).min(height.saturating_sub(1));
        let x1 = (self.right().ceil().min(width as f64) as u32).max(x0 + 1);
        let y1 = (self.bottom().ceil().min(height as f64) as u32).max(y0 + 1);
        (x0, y0, x1 - x0, y1 - y0)
    }
}

/// Intersection over union of two valid boxes.
pub fn iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.right().min(b.right()) - a.x.max(b.x)).max(0.0);
    let ih = (a.bottom().min(b.bottom()) - a.y.max(b.y)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return 0.0;
    }
    (inter / union).clamp(0.0, 1.0)
}
