use tracelab_core::taxonomy::{filter, registry, taxonomy_list, validate, Category, TaxonomyEntry};

#[test]
fn registry_is_valid_and_covers_every_category() {
    let r = registry();
    assert!(r.len() >= 21);
    validate(&r).unwrap();
    for c in Category::ALL {
        assert!(!filter(&r, Some(c)).is_empty(), "{c}");
    }
    assert_eq!(filter(&r, None), r);
}

#[test]
fn token_category_lists_the_quantized_generators() {
    let vq = taxonomy_list(Some("vq.de-tokenizer")).unwrap();
    let names: Vec<&str> = vq.iter().map(|e| e.name.as_str()).collect();
    for n in ["Emu3", "JanusPro", "LlamaGen", "VAR", "Infinity", "Kandinsky 3.0"] {
        assert!(names.contains(&n), "{n}");
    }
    assert!(vq.iter().all(|e| e.category == Category::VqDeTokenizer));
}

#[test]
fn generators_with_two_implementations_appear_in_two_categories() {
    let r = registry();
    for name in ["Flux 1-dev", "DeepFloyd IF"] {
        let hits: Vec<&TaxonomyEntry> = r.iter().filter(|e| e.name == name).collect();
        assert_eq!(hits.len(), 2, "{name}");
        assert_ne!(hits[0].category, hits[1].category);
        assert!(hits.iter().all(|e| e.implementation.is_some()));
    }
}

#[test]
fn tags_and_labels() {
    let r = registry();
    let sd = r.iter().find(|e| e.name == "Stable Diffusion 3.5").unwrap();
    assert_eq!(sd.tag(), "VAE.decoder-1.1");
    let gan = r.iter().find(|e| e.name == "GigaGAN").unwrap();
    assert_eq!(gan.tag(), "One-stop.generator");
    for c in Category::ALL {
        assert_eq!(Category::parse(&c.label().to_uppercase()).unwrap(), c);
    }
}

#[test]
fn unknown_category_and_duplicates_are_rejected() {
    assert!(taxonomy_list(Some("GAN.head")).is_err());
    let mut r = registry();
    let dup = r[0].clone();
    r.push(dup);
    assert!(validate(&r).is_err());
    let mut r = registry();
    let mut twin = r.iter().find(|e| e.name == "GigaGAN").unwrap().clone();
    twin.category = Category::VaeDecoder;
    r.push(twin);
    assert!(validate(&r).is_err(), "repeated name without implementations");
}

#[test]
fn entries_round_trip_through_json() {
    let r = registry();
    let json = serde_json::to_string(&r).unwrap();
    assert!(json.contains("\"VQ.de-tokenizer\""));
    let back: Vec<TaxonomyEntry> = serde_json::from_str(&json).unwrap();
    assert_eq!(back, r);
}
