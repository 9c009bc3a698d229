use crate::codec::{parse_add_prompt, AddPrompt};
use crate::model::{Image, Mask};
use crate::render::{render_object_patch, Palette};

use super::{bbox_of_mask, check_dims, BackendError, InpaintBackend};

/// Draws the prompted object fitted to the mask's bounding box, or fills the
/// mask with background gray.
#[derive(Debug, Clone, Default)]
pub struct ProceduralBackend {
    pub palette: Palette,
}

impl ProceduralBackend {
    pub fn new(palette: Palette) -> Self {
        Self { palette }
    }
}

impl InpaintBackend for ProceduralBackend {
    fn inpaint(&self, ctx: &Image, prompt: &str, mask: &Mask) -> Result<Image, BackendError> {
        check_dims(ctx, mask)?;
        let mut out = ctx.clone();
        match parse_add_prompt(prompt)? {
            AddPrompt::Background => {
                for y in 0..mask.height() {
                    for x in 0..mask.width() {
                        if mask.get(x, y) {
                            out.put(x, y, self.palette.background);
                        }
                    }
                }
            }
            AddPrompt::Object(attrs) => {
                let target = bbox_of_mask(mask)?;
                render_object_patch(&self.palette, attrs, &target).paste_into(&mut out);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::CodecError;
    use crate::model::{mask_from_box, Attributes, BBox, Canvas, ObjectSpec};
    use crate::render::render_objects;

    #[test]
    fn object_prompt_matches_renderer() {
        let be = ProceduralBackend::default();
        let c = Canvas::default();
        let ctx = Image::filled(c, be.palette.background);
        let b = BBox::new(40, 60, 200, 150).unwrap();
        let attrs = Attributes::parse_caption("cyan metal sphere").unwrap();
        let out = be.inpaint(&ctx, "Add cyan metal sphere", &mask_from_box(&b, c)).unwrap();
        assert_eq!(out, render_objects(&be.palette, c, &[ObjectSpec::new(attrs, b)]));
        let again = be.inpaint(&ctx, "Add cyan metal sphere", &mask_from_box(&b, c)).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn background_prompt_fills_mask() {
        let be = ProceduralBackend::default();
        let c = Canvas::new(30, 30);
        let ctx = Image::filled(c, [1, 2, 3]);
        let b = BBox::new(5, 5, 10, 12).unwrap();
        let out = be.inpaint(&ctx, "Add gray background", &mask_from_box(&b, c)).unwrap();
        assert_eq!(out.count_not([1, 2, 3]), 35);
        assert_eq!(out.get(5, 5), be.palette.background);
    }

    #[test]
    fn rejects_bad_input() {
        let be = ProceduralBackend::default();
        let c = Canvas::new(10, 10);
        let ctx = Image::filled(c, [0, 0, 0]);
        let m = mask_from_box(&BBox::new(0, 0, 2, 2).unwrap(), c);
        assert!(matches!(be.inpaint(&ctx, "draw a cat", &m), Err(BackendError::Prompt(CodecError::PromptParse(_)))));
        assert!(matches!(be.inpaint(&ctx, "Add red rubber cube", &Mask::zeros(c)), Err(BackendError::EmptyMask)));
        let other = Mask::zeros(Canvas::new(11, 10));
        assert!(matches!(be.inpaint(&ctx, "Add red rubber cube", &other), Err(BackendError::Dimension { .. })));
    }
}
