use crate::backend::InpaintBackend;
use crate::codec::{iterinpaint_prompt, BACKGROUND_PROMPT};
use crate::model::{mask_from_box, BBox, Canvas, Image, Region};

use super::{apply_step, blank, EngineError, Mode, StepTrace};

#[derive(Debug, Clone)]
struct Edit {
    trace: StepTrace,
    image_before: Image,
    objects_before: Vec<Region>,
}

/// Interactive editing state: the current image, the objects placed so far
/// and an undo history with one entry per edit.
#[derive(Debug, Clone)]
pub struct Session {
    image: Image,
    objects: Vec<Region>,
    history: Vec<Edit>,
    mode: Mode,
}

impl Session {
    pub fn new(canvas: Canvas) -> Self {
        Self::from_image(blank(canvas))
    }

    pub fn from_image(image: Image) -> Self {
        Self { image, objects: Vec::new(), history: Vec::new(), mode: Mode::Paste }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn image(&self) -> &Image {
        &self.image
    }

    pub fn canvas(&self) -> Canvas {
        self.image.canvas()
    }

    pub fn objects(&self) -> &[Region] {
        &self.objects
    }

    pub fn history_len(&self) -> usize {
        self.history.len()
    }

    pub fn traces(&self) -> impl Iterator<Item = &StepTrace> {
        self.history.iter().map(|e| &e.trace)
    }

    fn edit<B: InpaintBackend + ?Sized>(
        &mut self,
        backend: &B,
        prompt: String,
        bbox: &BBox,
        objects_after: Vec<Region>,
    ) -> Result<&StepTrace, EngineError> {
        bbox.check_within(self.canvas())?;
        let mask = mask_from_box(bbox, self.canvas());
        let trace = apply_step(backend, &self.image, prompt, mask, self.mode, self.history.len())?;
        let image_before = std::mem::replace(&mut self.image, trace.committed.clone());
        let objects_before = std::mem::replace(&mut self.objects, objects_after);
        self.history.push(Edit { trace, image_before, objects_before });
        Ok(&self.history.last().expect("just pushed").trace)
    }

    /// Draws `caption` into `bbox` in one step.
    pub fn add<B: InpaintBackend + ?Sized>(
        &mut self,
        caption: &str,
        bbox: BBox,
        backend: &B,
    ) -> Result<&StepTrace, EngineError> {
        let mut objects = self.objects.clone();
        objects.push(Region::new(caption, bbox));
        self.edit(backend, iterinpaint_prompt(caption), &bbox, objects)
    }

    /// Paints background over `bbox`, dropping objects placed at exactly that box.
    pub fn remove<B: InpaintBackend + ?Sized>(&mut self, bbox: BBox, backend: &B) -> Result<&StepTrace, EngineError> {
        let objects = self.objects.iter().filter(|r| r.bbox != bbox).cloned().collect();
        self.edit(backend, BACKGROUND_PROMPT.to_string(), &bbox, objects)
    }

    /// Reverts the last edit, restoring the prior image exactly.
    pub fn undo(&mut self) -> Result<StepTrace, EngineError> {
        let edit = self.history.pop().ok_or(EngineError::HistoryEmpty)?;
        self.image = edit.image_before;
        self.objects = edit.objects_before;
        Ok(edit.trace)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::backend::ProceduralBackend;

    fn b(x1: u32, y1: u32, x2: u32, y2: u32) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn add_then_undo_restores() {
        let be = ProceduralBackend::default();
        let mut s = Session::new(Canvas::default());
        s.add("red rubber cube", b(10, 10, 50, 50), &be).unwrap();
        let before = s.image().clone();
        s.add("blue metal sphere", b(30, 30, 120, 90), &be).unwrap();
        assert_ne!(s.image(), &before);
        assert_eq!(s.history_len(), 2);
        s.undo().unwrap();
        assert_eq!(s.image(), &before);
        assert_eq!(s.objects().len(), 1);
        s.undo().unwrap();
        assert!(matches!(s.undo(), Err(EngineError::HistoryEmpty)));
    }

    #[test]
    fn remove_restores_background() {
        let be = ProceduralBackend::default();
        let mut s = Session::new(Canvas::default());
        let blank = s.image().clone();
        s.add("yellow metal cylinder", b(100, 100, 180, 200), &be).unwrap();
        s.remove(b(100, 100, 180, 200), &be).unwrap();
        assert_eq!(s.image(), &blank);
        assert!(s.objects().is_empty());
        assert_eq!(s.traces().last().unwrap().prompt, "Add gray background");
    }

    #[test]
    fn disjoint_adds_commute() {
        let be = ProceduralBackend::default();
        let mut a = Session::new(Canvas::default());
        a.add("red rubber cube", b(10, 10, 50, 50), &be).unwrap();
        a.add("green metal sphere", b(200, 200, 260, 300), &be).unwrap();
        let mut c = Session::new(Canvas::default());
        c.add("green metal sphere", b(200, 200, 260, 300), &be).unwrap();
        c.add("red rubber cube", b(10, 10, 50, 50), &be).unwrap();
        assert_eq!(a.image(), c.image());
    }

    #[test]
    fn rejects_out_of_canvas_box() {
        let be = ProceduralBackend::default();
        let mut s = Session::new(Canvas::new(64, 64));
        assert!(s.add("red rubber cube", b(10, 10, 80, 20), &be).is_err());
        assert_eq!(s.history_len(), 0);
    }
}
