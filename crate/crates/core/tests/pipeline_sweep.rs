use lipogram::decoder::DecoderConfig;
use lipogram::lexicon::{Dictionary, Lexicon};
use lipogram::lm::NGramModel;
use lipogram::metrics::e_score;
use lipogram::metrics::embedding::TfIdfEmbedder;
use lipogram::passes::CasingTable;
use lipogram::pipeline::{translate_document, Method, Resources};
use lipogram::providers::OfflineGrammar;
use lipogram::sweep::{
    emit_sweep_csv, fit_decay, fit_xy, read_sweep_csv, render_svg, run_sweep, sweep_spearman,
    SweepSettings,
};
use lipogram::text::{letter_frequencies, split_paragraphs, ConstraintSet};
use proptest::prelude::*;

const CORPUS: &str = "\
In my younger and more vulnerable years my father gave me some advice that I've been turning over in my mind ever since.

\"Whenever you feel like criticizing any one,\" he told me, \"just remember that all the people in this world haven't had the advantages that you've had.\"

He didn't say any more but we've always been unusually communicative in a reserved way, and I understood that he meant a great deal more than that.

Daisy and Tom Buchanan lived in a white palace on the water. Tom was a big man with a hard mouth, and Daisy was his wife.

I saw a light at the end of a dock. It was green, and it was far away across the bay.";

const LEXICON: &str = "\
advice\tadvice\twarning,tip\t20
people\tpeople\tfolks,mankind\t300
father\tfather\tdad,pa\t50
world\tworld\tplanet\t80
";

struct Fixture {
    paragraphs: Vec<String>,
    model: NGramModel,
    lexicon: Lexicon,
    tfidf: TfIdfEmbedder,
    casing: CasingTable,
}

fn fixture() -> Fixture {
    let paragraphs = split_paragraphs(CORPUS);
    Fixture {
        model: NGramModel::train(CORPUS, 3).unwrap(),
        lexicon: Lexicon::parse(LEXICON).unwrap(),
        tfidf: TfIdfEmbedder::from_documents(&paragraphs),
        casing: CasingTable::from_corpus(CORPUS),
        paragraphs,
    }
}

fn resources(f: &Fixture) -> Resources<'_> {
    Resources {
        model: &f.model,
        lexicon: &f.lexicon,
        tfidf: &f.tfidf,
        similarity: &f.tfidf,
        grammar: &OfflineGrammar,
        casing: &f.casing,
    }
}

fn small() -> DecoderConfig {
    DecoderConfig {
        beam_width: 6,
        candidates_k: 3,
        ..DecoderConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn every_method_avoids_random_letter_sets(letters in "[a-z]{1,4}", method in 0usize..3) {
        let f = fixture();
        let c = ConstraintSet::parse(&letters).unwrap();
        let method = [Method::Edelete, Method::Synonym, Method::Beam][method];
        let t = translate_document(&f.paragraphs, &c, method, &small(), &resources(&f)).unwrap();
        prop_assert_eq!(t.paragraphs.len(), f.paragraphs.len());
        for p in &t.paragraphs {
            prop_assert_eq!(e_score(p, &c), 0.0, "{} under {}: {}", method, c, p);
        }
        for w in &t.warnings {
            prop_assert!(t.paragraphs[w.index].is_empty());
        }
    }
}

#[test]
fn beam_translation_keeps_entities_recognizable() {
    let f = fixture();
    let e = ConstraintSet::parse("e").unwrap();
    let t = translate_document(&f.paragraphs, &e, Method::Beam, &small(), &resources(&f)).unwrap();
    assert_eq!(t.entities.as_ref().unwrap().alias("Daisy"), Some("Daisy"));
    assert_eq!(
        t.entities.as_ref().unwrap().alias("Tom Buchanan"),
        Some("Tom Buchanan")
    );
    let doc = t.to_document();
    assert_eq!(split_paragraphs(&doc).len(), f.paragraphs.len());
}

#[test]
fn sweep_points_match_independent_counts() {
    let f = fixture();
    let freqs = letter_frequencies(CORPUS).unwrap();
    let dictionary: Dictionary = CORPUS.split_whitespace().collect();
    let sets: Vec<(String, ConstraintSet)> = ["e", "q", "t", "aeiou"]
        .iter()
        .map(|s| (s.to_string(), ConstraintSet::parse(s).unwrap()))
        .collect();
    let cfg = small();
    let settings = SweepSettings {
        method: Method::Edelete,
        decoder: &cfg,
        dictionary: &dictionary,
        frequencies: &freqs,
    };
    let points = run_sweep(&f.paragraphs, &sets, 3, &settings, &resources(&f)).unwrap();
    assert_eq!(points.len(), 4);
    let letters_total = CORPUS.chars().filter(char::is_ascii_alphabetic).count() as f64;
    for (p, (label, c)) in points.iter().zip(&sets) {
        assert_eq!(&p.label, label);
        assert_eq!(p.mean_e_score, 0.0);
        assert_eq!(p.n_paragraphs, 3);
        let excluded = CORPUS
            .chars()
            .filter(|ch| c.contains(ch.to_ascii_lowercase()))
            .count() as f64;
        assert!((p.exclusion_fraction - excluded / letters_total).abs() < 1e-12);
    }
    // "q" never occurs, so deleting it changes nothing
    assert!((points[1].mean_similarity - 1.0).abs() < 1e-9);
    assert!(points[3].mean_similarity < points[0].mean_similarity);
    assert!(sweep_spearman(&points).unwrap() < 0.0);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    emit_sweep_csv(&points, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "label,letters,exclusion_fraction,mean_similarity,mean_e_score,mean_oov,mean_grammar_count,n_paragraphs"
    );
    assert_eq!(read_sweep_csv(&path).unwrap(), points);

    let fit = fit_decay(&points).unwrap();
    assert!(fit.linear.slope < 0.0);
    let svg = render_svg(&points, Some(&fit));
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    assert_eq!(svg.matches("<circle").count(), points.len());
}

#[test]
fn exponential_decay_is_recovered_from_clean_samples() {
    let xs: Vec<f64> = (0..20).map(|i| i as f64 / 19.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| 2.0 * (-3.0 * x).exp()).collect();
    let fit = fit_xy(&xs, &ys).unwrap().exponential.unwrap();
    assert!((fit.a - 2.0).abs() / 2.0 < 0.01);
    assert!((fit.b - 3.0).abs() / 3.0 < 0.01);
    assert!(fit.r2 > 0.999);
}
