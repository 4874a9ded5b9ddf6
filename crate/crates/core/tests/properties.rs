//! Property tests, each checked against a naive recount.

use std::collections::{BTreeMap, HashSet};

use chrono::{Duration, TimeZone, Utc};
use num_rational::Ratio;
use polemos::analysis::{affinity_by_label, bin_by_fortnight, count_by_label, percent_difference, LabeledComment};
use polemos::annotation::{sample_for_annotation, QuotaTarget, Stage, StageState};
use polemos::annotation::session::AnnotationSession;
use polemos::classifier::{softmax, split_holdout, tokenize, FeatureHasher, Metrics};
use polemos::corpus::{clean_comments, Comment, StudyWindow};
use polemos::labels::{StanceLabel, NUM_LABELS};
use proptest::prelude::*;

fn anchor() -> chrono::DateTime<Utc> {
    Utc.with_ymd_and_hms(2023, 10, 7, 0, 0, 0).unwrap()
}

fn labeled(rows: &[(u8, u32, u16)]) -> Vec<LabeledComment> {
    rows.iter()
        .enumerate()
        .map(|(i, &(code, secs, likes))| LabeledComment {
            comment_id: format!("c{i}"),
            published_at: anchor() + Duration::seconds(secs as i64),
            like_count: likes as u64,
            code,
        })
        .collect()
}

fn rows() -> impl Strategy<Value = Vec<(u8, u32, u16)>> {
    prop::collection::vec((0u8..7, 0u32..8_100_000, any::<u16>()), 0..400)
}

fn comment_strategy() -> impl Strategy<Value = Comment> {
    let text = prop_oneof![
        Just(String::new()),
        Just("   ".to_string()),
        Just("😀🔥".to_string()),
        Just("a 👍".to_string()),
        Just("paz ya".to_string()),
        "[a-zñ ]{0,12}",
    ];
    (text, 0u8..3, 0u8..3, -5i64..100, any::<u8>()).prop_map(|(text, v, a, day, likes)| Comment {
        comment_id: String::new(),
        author: format!("@a{a}"),
        published_at: anchor() + Duration::days(day),
        like_count: likes as u64,
        text,
        video_id: format!("v{v}"),
        is_public: true,
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn counts_match_recount(rows in rows()) {
        let codes: Vec<u8> = rows.iter().map(|r| r.0).collect();
        let counts = count_by_label(codes.iter().copied());
        for k in 0..NUM_LABELS {
            prop_assert_eq!(counts[k], codes.iter().filter(|&&c| c as usize == k).count() as u64);
        }
    }

    #[test]
    fn bins_match_recount(rows in rows()) {
        let comments = labeled(&rows);
        let series = bin_by_fortnight(&comments, anchor(), None).unwrap();
        let fortnight = 14 * 86_400u32;
        let nbins = rows.iter().map(|r| r.1 / fortnight + 1).max().unwrap_or(0) as usize;
        prop_assert_eq!(series.len(), nbins);
        for (b, counts) in series.counts.iter().enumerate() {
            for k in 0..NUM_LABELS {
                let expect = rows
                    .iter()
                    .filter(|r| (r.1 / fortnight) as usize == b && r.0 as usize == k)
                    .count() as u64;
                prop_assert_eq!(counts[k], expect);
            }
        }
        prop_assert_eq!(series.counts.iter().flatten().sum::<u64>(), rows.len() as u64);
    }

    #[test]
    fn affinity_matches_recount(rows in rows()) {
        let report = affinity_by_label(&labeled(&rows));
        for (k, row) in report.rows.iter().enumerate() {
            let mine: Vec<u64> = rows.iter().filter(|r| r.0 as usize == k).map(|r| r.2 as u64).collect();
            prop_assert_eq!(row.comment_count, mine.len() as u64);
            prop_assert_eq!(row.like_sum, mine.iter().sum::<u64>());
            let mean = (!mine.is_empty()).then(|| Ratio::new(mine.iter().sum::<u64>(), mine.len() as u64));
            prop_assert_eq!(row.mean_likes, mean);
        }
    }

    #[test]
    fn metrics_match_recount(pairs in prop::collection::vec((0u8..7, 0u8..7), 0..300)) {
        let m = Metrics::from_pairs(pairs.iter().copied());
        let correct = pairs.iter().filter(|(t, p)| t == p).count() as u64;
        prop_assert_eq!(m.correct, correct);
        prop_assert_eq!(m.total, pairs.len() as u64);
        if !pairs.is_empty() {
            prop_assert_eq!(m.accuracy, correct as f64 / pairs.len() as f64);
        }
        for t in 0..7u8 {
            for p in 0..7u8 {
                let n = pairs.iter().filter(|&&x| x == (t, p)).count() as u64;
                prop_assert_eq!(m.confusion[t as usize][p as usize], n);
            }
        }
    }

    #[test]
    fn percent_difference_rounds_like_integer_oracle(a in 0u64..10_000_000, b in 1u64..10_000_000) {
        // (a - b) * 10000 / b, rounded half away from zero, in integers.
        let num = (a as i128 - b as i128) * 10_000;
        let den = b as i128;
        let q = (num.abs() * 2 + den) / (2 * den);
        let sign = if num < 0 && q != 0 { "-" } else { "" };
        let expect = format!("{sign}{}.{:02}", q / 100, q % 100);
        prop_assert_eq!(percent_difference(a, b).unwrap().to_string(), expect);
    }

    #[test]
    fn cleaning_keeps_only_valid_unique_comments(mut input in prop::collection::vec(comment_strategy(), 0..80)) {
        for (i, c) in input.iter_mut().enumerate() {
            c.comment_id = format!("c{i}");
        }
        let window = StudyWindow::default();
        let (kept, report) = clean_comments(input.clone(), &window);
        prop_assert_eq!(report.input_count, input.len() as u64);
        prop_assert_eq!(report.output_count + report.removed_total(), report.input_count);
        prop_assert_eq!(report.output_count, kept.len() as u64);
        let mut keys = HashSet::new();
        for c in &kept {
            prop_assert!(!c.text.trim().is_empty());
            prop_assert!(c.text.chars().filter(|ch| ch.is_alphabetic()).count() >= 2);
            prop_assert!(window.contains(c.published_at));
            prop_assert!(keys.insert((c.video_id.clone(), c.author.clone(), c.text.clone(), c.published_at)));
        }
        let ids: Vec<&str> = kept.iter().map(|c| c.comment_id.as_str()).collect();
        let mut sorted = ids.clone();
        sorted.sort_by_key(|id| id[1..].parse::<usize>().unwrap());
        prop_assert_eq!(ids, sorted, "order preserved");
        let (again, _) = clean_comments(kept.clone(), &window);
        prop_assert_eq!(again, kept);
    }

    #[test]
    fn softmax_is_a_distribution(z in prop::array::uniform7(-700.0f64..700.0)) {
        let p = softmax(&z);
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        prop_assert!(p.iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn holdout_split_partitions(n in 0usize..500, frac in 0.0f64..1.0, seed in any::<u64>()) {
        let s = split_holdout(n, frac, seed);
        let mut all: Vec<usize> = s.train.iter().chain(&s.holdout).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(s.holdout.len(), ((n as f64 * frac).floor() as usize).min(n.saturating_sub(1)));
        prop_assert_eq!(split_holdout(n, frac, seed), s);
    }

    #[test]
    fn sampling_is_seeded_and_without_replacement(n in 0usize..60, extra in 0usize..60, seed in any::<u64>()) {
        let corpus: Vec<Comment> = (0..n + extra)
            .map(|i| Comment {
                comment_id: format!("c{i}"),
                author: "@a".into(),
                published_at: anchor(),
                like_count: 0,
                text: "texto".into(),
                video_id: format!("v{}", i % 4),
                is_public: true,
            })
            .collect();
        let a = sample_for_annotation(&corpus, n, seed, 0.1).unwrap();
        let b = sample_for_annotation(&corpus, n, seed, 0.1).unwrap();
        prop_assert_eq!(&a, &b);
        prop_assert_eq!(a.comment_ids.len(), n);
        prop_assert_eq!(a.comment_ids.iter().collect::<HashSet<_>>().len(), n);
        prop_assert!(sample_for_annotation(&corpus, n + extra + 1, seed, 0.1).is_err());
    }

    #[test]
    fn features_are_unit_norm(text in "[a-záéíóúñ ]{0,60}", salt in any::<u64>()) {
        let h = FeatureHasher::new(1 << 12, salt);
        let tokens = tokenize(&text);
        let v = h.featurize(tokens.as_slice());
        if v.nnz() == 0 {
            prop_assert_eq!(v.norm(), 0.0);
        } else {
            prop_assert!((v.norm() - 1.0).abs() < 1e-12);
        }
        let mut idx: Vec<u32> = v.entries().iter().map(|e| e.0).collect();
        idx.dedup();
        prop_assert_eq!(idx.len(), v.nnz());
        prop_assert!(idx.iter().all(|&j| (j as usize) < h.dim));
    }

    #[test]
    fn progress_matches_replayed_log(ops in prop::collection::vec((0usize..12, 0u8..3, 0i64..7, any::<bool>()), 0..80)) {
        let sample: Vec<Comment> = (0..12)
            .map(|i| Comment {
                comment_id: format!("c{i}"),
                author: "@a".into(),
                published_at: anchor(),
                like_count: 0,
                text: format!("texto {i}"),
                video_id: "v".into(),
                is_public: true,
            })
            .collect();
        let mut session = AnnotationSession::new(sample, QuotaTarget::uniform(3));
        // annotator -> comments in labeling order; (comment, annotator) -> label stack
        let mut recent: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
        let mut stacks: BTreeMap<(usize, u8), Vec<i64>> = BTreeMap::new();
        for (c, who, code, undo) in ops {
            let name = format!("ann{who}");
            if undo {
                let expected = recent.get_mut(&who).and_then(Vec::pop);
                let got = session.undo_last(&name, anchor());
                prop_assert_eq!(got.is_ok(), expected.is_some());
                if let Some(i) = expected {
                    let s = stacks.get_mut(&(i, who)).unwrap();
                    s.pop();
                }
            } else {
                session.record_label(&format!("c{c}"), code, &name, anchor()).unwrap();
                recent.entry(who).or_default().push(c);
                stacks.entry((c, who)).or_default().push(code);
            }
        }
        let mut expect = [0u64; NUM_LABELS];
        for s in stacks.values() {
            if let Some(&l) = s.last() {
                expect[l as usize] += 1;
            }
        }
        let progress = session.progress();
        for p in &progress.per_label {
            prop_assert_eq!(p.count, expect[p.code as usize]);
            prop_assert_eq!(p.met, p.count >= 3);
        }
        prop_assert_eq!(progress.total, expect.iter().sum::<u64>());
    }

    #[test]
    fn reach_always_leaves_a_valid_path(targets in prop::collection::vec(0usize..7, 0..20)) {
        let mut s = StageState::new(anchor());
        for t in targets {
            let target = Stage::ALL[t];
            let _ = s.reach(target, anchor(), "prop");
            prop_assert!(s.is_valid_path());
        }
        for w in s.history().windows(2) {
            prop_assert!(w[0].stage.can_advance_to(w[1].stage));
        }
    }
}

#[test]
fn label_codes_round_trip() {
    for l in StanceLabel::ALL {
        assert_eq!(StanceLabel::try_from(l.code()).unwrap(), l);
    }
}
