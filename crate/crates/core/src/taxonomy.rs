//! Registry of generators grouped by the input space of their final
//! component.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "VAE.decoder")]
    VaeDecoder,
    #[serde(rename = "VQ.de-tokenizer")]
    VqDeTokenizer,
    #[serde(rename = "Diffusion.denoiser")]
    DiffusionDenoiser,
    #[serde(rename = "One-stop.generator")]
    OneStopGenerator,
}

impl Category {
    pub const ALL: [Category; 4] =
        [Category::VaeDecoder, Category::VqDeTokenizer, Category::DiffusionDenoiser, Category::OneStopGenerator];

    pub fn label(self) -> &'static str {
        match self {
            Category::VaeDecoder => "VAE.decoder",
            Category::VqDeTokenizer => "VQ.de-tokenizer",
            Category::DiffusionDenoiser => "Diffusion.denoiser",
            Category::OneStopGenerator => "One-stop.generator",
        }
    }

    /// Case-insensitive match on the label, e.g. `vq.de-tokenizer`.
    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL.into_iter().find(|c| c.label().eq_ignore_ascii_case(s.trim())).ok_or_else(|| {
            config_err!(
                "unknown category {s:?}; expected one of {}",
                Self::ALL.map(|c| c.label()).join(", ")
            )
        })
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyEntry {
    pub name: String,
    /// Distinguishes generators with several official implementations whose
    /// final components differ.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub implementation: Option<String>,
    pub category: Category,
    pub subcategory: String,
    /// Subcategory code such as `1.1`, where one is established.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub code: Option<String>,
    pub source: String,
}

impl TaxonomyEntry {
    /// `Category-code` when a code exists, e.g. `VAE.decoder-1.1`.
    pub fn tag(&self) -> String {
        match &self.code {
            Some(c) => alloc::format!("{}-{c}", self.category),
            None => self.category.to_string(),
        }
    }
}

struct Row(&'static str, Option<&'static str>, Category, &'static str, Option<&'static str>, &'static str);

const ROWS: &[Row] = {
    use Category::*;
    &[
        Row("Stable Diffusion 2.1", None, VaeDecoder, "latent diffusion", Some("1.1"), "stabilityai/stable-diffusion-2-1 VAE; representative continuous-latent component"),
        Row("Stable Diffusion 3.5", None, VaeDecoder, "latent diffusion", Some("1.1"), "github.com/Stability-AI/sd3.5 @106db06, sd3_infer.py:495 vae_decode"),
        Row("Flux 1-dev", Some("diffusers"), VaeDecoder, "latent diffusion", Some("1.1"), "diffusers pipelines/flux @5e181ed, pipeline_flux.py:1006 vae.decode"),
        Row("HiDream-I1", None, VaeDecoder, "enhancement", Some("1.2"), "github.com/HiDream-ai/HiDream-I1 @3519729, pipeline_hidream_image.py:724 vae.decode"),
        Row("Stable Diffusion XL", None, VaeDecoder, "latent diffusion", Some("1.1"), "diffusers pipelines/stable_diffusion_xl @0d1c5b0, pipeline_stable_diffusion_xl.py:1292 vae.decode"),
        Row("CogView4", None, VaeDecoder, "latent super-resolution", Some("1.3"), "diffusers pipelines/cogview4 @0d1c5b0, pipeline_cogview4.py:673 vae.decode"),
        Row("DeepFloyd IF", Some("stable-diffusion-x4-upscaler"), VaeDecoder, "latent super-resolution", Some("1.3"), "github.com/deep-floyd/IF @af64403, stage_III_sd_x4.py:80; diffusers pipeline_stable_diffusion_upscale.py:798 vae.decode"),
        Row("Emu3", None, VqDeTokenizer, "next-token auto-regression", Some("2.2"), "github.com/baaivision/Emu3 @1a43ee6, processing_emu3.py:198-199 multimodal_decode"),
        Row("JanusPro", None, VqDeTokenizer, "next-token auto-regression", Some("2.2"), "github.com/deepseek-ai/Janus @659982f, vq_model.py:506-507 get_codebook_entry + decode; representative token component"),
        Row("LlamaGen", None, VqDeTokenizer, "next-token auto-regression", Some("2.2"), "github.com/FoundationVision/LlamaGen @5a50452, sample_t2i.py:121 decode_code"),
        Row("VAR", None, VqDeTokenizer, "next-scale auto-regression", None, "github.com/FoundationVision/VAR @a5cf0a1, models/var.py:190 fhat_to_img"),
        Row("Infinity", None, VqDeTokenizer, "next-scale auto-regression", None, "github.com/FoundationVision/Infinity @3ab8e0c, infinity.py:636 vae.decode"),
        Row("Kandinsky 3.0", None, VqDeTokenizer, "latent diffusion hybrid", None, "github.com/ai-forever/Kandinsky-3 @10db67a, movq.py:420-421 post_quant_conv + decoder"),
        Row("MAR", None, DiffusionDenoiser, "continuous token", None, "github.com/LTH14/mar @fe1de72, models/mar.py:225; final step is a denoiser-shaped decoder without noise"),
        Row("DALL-E 2", None, DiffusionDenoiser, "cascade super-resolution", None, "documentation only: two diffusion upsamplers 64->256->1024"),
        Row("DALL-E 3", None, DiffusionDenoiser, "cascade super-resolution", None, "no public code or detailed documentation; placed by its stated architecture family"),
        Row("GLIDE", None, DiffusionDenoiser, "cascade super-resolution", None, "github.com/openai/glide-text2im @1f791b8, text2im_model.py:167"),
        Row("PixelFlow", None, DiffusionDenoiser, "end-to-end super-resolution", Some("3.3"), "github.com/ShoufaChen/PixelFlow @eeabc08, pipeline_pixelflow.py:253 scheduler.step; representative denoising component"),
        Row("ReflectionFlow", None, DiffusionDenoiser, "same-size pixels", None, "github.com/Diffusion-CoT/ReflectionFlow train_flux/sample.py; refines with the pixel-space Flux 1-dev"),
        Row("DDPM", None, DiffusionDenoiser, "same-size pixels", None, "github.com/hojonathanho/diffusion @c461299, diffusion_utils_2.py:211 p_sample"),
        Row("DDIM", None, DiffusionDenoiser, "same-size pixels", None, "diffusers pipelines/ddim @a4df8db, pipeline_ddim.py:152 scheduler.step"),
        Row("Flux 1-dev", Some("black-forest-labs"), DiffusionDenoiser, "same-size pixels", None, "github.com/black-forest-labs/flux @57ce405, sampling.py:351 pixel-space update"),
        Row("DeepFloyd IF", Some("pixel-space stage III"), DiffusionDenoiser, "cascade super-resolution", None, "github.com/deep-floyd/IF @af64403, stage_III.py:26 and base.py:194 p_sample_loop"),
        Row("GigaGAN", None, OneStopGenerator, "GAN", None, "github.com/lucidrains/gigagan-pytorch @0806433, gigagan_pytorch.py:2167-2169 generator call"),
        Row("JetFormer", None, OneStopGenerator, "pixel-wise auto-regression", None, "github.com/google-research/big_vision @9c006bf, jetformer.py:481 decoder"),
    ]
};

/// The bundled registry, in a fixed order.
pub fn registry() -> Vec<TaxonomyEntry> {
    ROWS.iter()
        .map(|Row(name, imp, category, sub, code, source)| TaxonomyEntry {
            name: name.to_string(),
            implementation: imp.map(ToString::to_string),
            category: *category,
            subcategory: sub.to_string(),
            code: code.map(ToString::to_string),
            source: source.to_string(),
        })
        .collect()
}

/// Entries of one category (all entries for `None`), in registry order.
pub fn filter(entries: &[TaxonomyEntry], category: Option<Category>) -> Vec<TaxonomyEntry> {
    entries.iter().filter(|e| category.is_none_or(|c| e.category == c)).cloned().collect()
}

/// Registry entries matching an optional category label.
pub fn taxonomy_list(category: Option<&str>) -> Result<Vec<TaxonomyEntry>> {
    let c = category.map(Category::parse).transpose()?;
    Ok(filter(&registry(), c))
}

/// Checks that `(name, implementation)` is unique and that generators listed
/// more than once carry an implementation on every entry.
pub fn validate(entries: &[TaxonomyEntry]) -> Result<()> {
    for (i, e) in entries.iter().enumerate() {
        if e.name.trim().is_empty() {
            return Err(config_err!("entry {i} has an empty name"));
        }
        for f in &entries[..i] {
            if f.name == e.name && (f.implementation.is_none() || e.implementation.is_none()) {
                return Err(config_err!("{} is listed twice without distinct implementations", e.name));
            }
            if f.name == e.name && f.implementation == e.implementation {
                return Err(config_err!("duplicate entry {} ({:?})", e.name, e.implementation));
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_registry_is_valid() {
        let r = registry();
        validate(&r).unwrap();
        assert!(r.len() >= 21);
        for c in Category::ALL {
            assert!(!filter(&r, Some(c)).is_empty());
        }
    }

    #[test]
    fn representative_tags() {
        let r = registry();
        let tag = |n: &str| r.iter().find(|e| e.name == n).unwrap().tag();
        assert_eq!(tag("Stable Diffusion 2.1"), "VAE.decoder-1.1");
        assert_eq!(tag("JanusPro"), "VQ.de-tokenizer-2.2");
        assert_eq!(tag("PixelFlow"), "Diffusion.denoiser-3.3");
    }

    #[test]
    fn parse_labels() {
        assert_eq!(Category::parse("vq.de-tokenizer").unwrap(), Category::VqDeTokenizer);
        assert!(Category::parse("GAN").is_err());
        assert!(taxonomy_list(Some("nope")).is_err());
    }

    #[test]
    fn duplicates_are_rejected() {
        let mut r = registry();
        r.push(r[0].clone());
        assert!(validate(&r).is_err());
    }
}
