mod common;

use std::time::Instant;

use sonneteer::poemgen::{AuthorChoice, GenerationConfig};
use sonneteer::Form;

#[test]
fn sonnet_for_each_fixture_author() {
    let gen = common::fixture_generator();
    for author in gen.authors() {
        let config = GenerationConfig {
            prompt: "love".into(),
            seed: 7,
            author: AuthorChoice::Named(author.to_string()),
            ..GenerationConfig::default()
        };
        let t = Instant::now();
        let poem = gen.generate(&config).unwrap();
        eprintln!("{author} in {:?}\n{}", t.elapsed(), poem.text());
        assert_eq!(poem.lines.len(), 14);
        assert_eq!(poem.scheme, "ABABCDCDEFEFGG");
    }
}

#[test]
fn short_form_has_six_lines() {
    let gen = common::fixture_generator();
    let config = GenerationConfig {
        prompt: "the sea at night".into(),
        form: Form::Short,
        seed: 3,
        ..GenerationConfig::default()
    };
    let poem = gen.generate(&config).unwrap();
    assert_eq!(poem.lines.len(), 6);
    assert_eq!(poem.scheme, "ABABCC");
    assert!(poem.lines[3].text.ends_with('.') && poem.lines[5].text.ends_with('.'));
}
