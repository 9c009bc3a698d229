use std::sync::{Condvar, Mutex};
use std::time::Duration;

use base64::engine::general_purpose::STANDARD;
use base64::Engine as _;
use serde::{Deserialize, Serialize};

use crate::model::{Image, Mask};

use super::{check_dims, BackendConfig, BackendError, InpaintBackend};

/// Body of `POST {endpoint}/inpaint`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintRequest {
    /// Base64 RGB PNG.
    pub image: String,
    /// Base64 grayscale PNG, 255 = update.
    pub mask: String,
    pub prompt: String,
    pub guidance_scale: f64,
    pub steps: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InpaintResponse {
    pub image: String,
}

/// Error body returned alongside a non-2xx status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireError {
    pub error: String,
}

impl InpaintRequest {
    pub fn new(ctx: &Image, prompt: &str, mask: &Mask, guidance_scale: f64, steps: u32) -> Result<Self, BackendError> {
        Ok(Self {
            image: STANDARD.encode(ctx.encode_png()?),
            mask: STANDARD.encode(mask.encode_png()?),
            prompt: prompt.to_string(),
            guidance_scale,
            steps,
        })
    }

    pub fn decode(&self) -> Result<(Image, Mask), BackendError> {
        let bytes = |s: &str| STANDARD.decode(s).map_err(|e| BackendError::Protocol(e.to_string()));
        Ok((Image::decode_png(&bytes(&self.image)?)?, Mask::decode_png(&bytes(&self.mask)?)?))
    }
}

impl InpaintResponse {
    pub fn new(image: &Image) -> Result<Self, BackendError> {
        Ok(Self { image: STANDARD.encode(image.encode_png()?) })
    }

    pub fn decode(&self) -> Result<Image, BackendError> {
        let bytes = STANDARD.decode(&self.image).map_err(|e| BackendError::Protocol(e.to_string()))?;
        Ok(Image::decode_png(&bytes)?)
    }
}

/// Counting semaphore bounding concurrent requests.
#[derive(Debug)]
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|p| p.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|p| p.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|p| p.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

/// HTTP client for an external inpainting service.
#[derive(Debug)]
pub struct RemoteBackend {
    url: String,
    client: reqwest::blocking::Client,
    guidance_scale: f64,
    steps: u32,
    slots: Slots,
}

impl RemoteBackend {
    pub fn new(config: &BackendConfig) -> Result<Self, BackendError> {
        let endpoint = config.endpoint.as_deref().ok_or_else(|| BackendError::Config("missing endpoint".into()))?;
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_millis(config.timeout_ms))
            .build()
            .map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(Self {
            url: format!("{}/inpaint", endpoint.trim_end_matches('/')),
            client,
            guidance_scale: config.guidance_scale,
            steps: config.steps,
            slots: Slots { free: Mutex::new(config.max_inflight.max(1)), cv: Condvar::new() },
        })
    }

    fn classify(e: reqwest::Error) -> BackendError {
        if e.is_timeout() {
            BackendError::Timeout
        } else {
            BackendError::Unavailable(e.to_string())
        }
    }
}

impl InpaintBackend for RemoteBackend {
    fn inpaint(&self, ctx: &Image, prompt: &str, mask: &Mask) -> Result<Image, BackendError> {
        check_dims(ctx, mask)?;
        let body = InpaintRequest::new(ctx, prompt, mask, self.guidance_scale, self.steps)?;
        let _slot = self.slots.acquire();
        log::debug!("POST {} prompt={prompt:?}", self.url);
        let resp = self.client.post(&self.url).json(&body).send().map_err(Self::classify)?;
        let status = resp.status();
        let text = resp.text().map_err(Self::classify)?;
        if !status.is_success() {
            let body = serde_json::from_str::<WireError>(&text).map(|w| w.error).unwrap_or(text);
            return Err(BackendError::Rejected { status: status.as_u16(), body });
        }
        let parsed: InpaintResponse =
            serde_json::from_str(&text).map_err(|e| BackendError::Protocol(e.to_string()))?;
        let image = parsed.decode()?;
        if image.canvas() != ctx.canvas() {
            return Err(BackendError::Protocol(format!(
                "response is {}x{}, expected {}x{}",
                image.width(),
                image.height(),
                ctx.width(),
                ctx.height()
            )));
        }
        Ok(image)
    }
}
