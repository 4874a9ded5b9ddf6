//! Seeded synthetic corpus for demos and end-to-end tests.
//!
//! Each category has its own word list; a comment mixes several words from
//! its category with shared filler, the odd stray word from another category
//! and sometimes an emoji. A small share of records is deliberately dirty
//! (emoji-only, out of window, duplicated) so cleaning has work to do.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Comment, CorpusError, StudyWindow, VideoRef};
use crate::ingest::mock::MockFixture;
use crate::labels::{StanceLabel, NUM_LABELS};

/// Vocabulary each category draws from, indexed by code.
pub const LEXICON: [&[&str]; NUM_LABELS] = [
    &[
        "hamas", "terroristas", "terrorismo", "secuestradores", "rehenes", "milicianos", "yihadistas", "masacre",
        "cobardes", "escudos", "humanos", "culpables", "atentado", "liberen", "túneles", "criminales",
        "fanáticos", "asesinos", "responsables", "grupo", "armado", "ataque", "festival", "brutalidad",
    ],
    &[
        "genocidio", "sionista", "sionistas", "apartheid", "netanyahu", "bombardeos", "ocupación", "colonos",
        "crímenes", "limpieza", "étnica", "asesino", "estado", "invasor", "hospitales", "niños",
        "castigo", "colectivo", "vergüenza", "impunidad", "bloqueo", "mentiras", "propaganda", "verdugo",
    ],
    &[
        "palestinos", "se", "lo", "buscaron", "merecen", "fanatismo", "islam", "religión",
        "salvajes", "atrasados", "culpa", "suya", "votaron", "apoyan", "celebraron", "barbarie",
        "inferiores", "odio", "extremistas", "mezquitas", "adoctrinados", "bárbaros", "cómplices", "pueblo",
    ],
    &[
        "ambos", "bandos", "ninguno", "guerra", "absurda", "paz", "periodista", "presentador",
        "canal", "noticiero", "ojalá", "termine", "inocentes", "sufren", "dos", "lados",
        "políticos", "gobiernos", "medios", "imparcial", "neutral", "diálogo", "tristeza", "mundo",
    ],
    &[
        "receta", "fútbol", "gol", "partido", "suscríbete", "música", "canción", "primer",
        "comentario", "saludos", "desde", "méxico", "colombia", "like", "minuto", "volumen",
        "audio", "cámara", "videojuego", "tutorial", "cumpleaños", "mascota", "perrito", "clima",
    ],
    &[
        "apoyo", "israel", "derecho", "defenderse", "idf", "am", "yisrael", "jai",
        "fuerza", "soldados", "valientes", "tel", "aviv", "judíos", "seguridad", "legítima",
        "defensa", "democracia", "aliados", "estrella", "david", "orgulloso", "proteger", "kibutz",
    ],
    &[
        "palestina", "libre", "free", "palestine", "solidaridad", "gaza", "resiste", "pueblo",
        "palestino", "humanitaria", "ayuda", "civiles", "refugiados", "cisjordania", "dignidad", "resistencia",
        "hermanos", "oramos", "alto", "fuego", "justicia", "víctimas", "familias", "esperanza",
    ],
];

const FILLER: &[&str] = &[
    "el", "la", "los", "que", "de", "en", "y", "a", "es", "esto", "muy", "todo", "video", "hoy", "ya", "más",
    "no", "por", "para", "con",
];

const EMOJI: &[&str] = &["😢", "🙏", "🇵🇸", "🇮🇱", "👍", "😡", "❤️", "💔", "🔥", "👏"];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub comments: usize,
    pub videos: usize,
    pub queries: Vec<String>,
    /// Videos whose comments are turned off; they get no comments.
    pub disabled_videos: usize,
    /// Relative frequency of each category.
    pub label_weights: [f64; NUM_LABELS],
    /// From this day of the window on, `late_boost` multiplies the weight of
    /// ANTI_ISRAEL.
    pub late_day: i64,
    pub late_boost: f64,
    /// Share of records that are dirty on purpose.
    pub noise_fraction: f64,
    /// Code-0 texts are drawn from the code-2 and code-5 word lists, so the
    /// category has no signal of its own.
    pub collapse_code0: bool,
    pub window: StudyWindow,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            comments: 5000,
            videos: 24,
            queries: vec![
                "Israel Palestina".into(),
                "Gaza noticias".into(),
                "Hamas Israel guerra".into(),
                "conflicto Gaza".into(),
            ],
            disabled_videos: 1,
            label_weights: [0.1, 0.14, 0.1, 0.16, 0.16, 0.14, 0.2],
            late_day: 86,
            late_boost: 3.0,
            noise_fraction: 0.02,
            collapse_code0: false,
            window: StudyWindow::default(),
        }
    }
}

impl SynthConfig {
    /// Code 0 is rare and borrows the vocabulary of codes 2 and 5, so a
    /// classifier has no reason to ever predict it.
    pub fn collapse() -> Self {
        Self {
            collapse_code0: true,
            label_weights: [0.015, 0.12, 0.12, 0.2, 0.2, 0.13, 0.2],
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthCorpus {
    pub queries: Vec<String>,
    pub videos: Vec<VideoRef>,
    pub disabled: Vec<String>,
    pub comments: Vec<Comment>,
    /// True category of every comment id, including dirty records.
    pub gold: BTreeMap<String, u8>,
}

fn pick_label(rng: &mut ChaCha8Rng, weights: &[f64; NUM_LABELS]) -> usize {
    let total: f64 = weights.iter().sum();
    let mut x = rng.random::<f64>() * total;
    for (i, w) in weights.iter().enumerate() {
        if x < *w {
            return i;
        }
        x -= w;
    }
    NUM_LABELS - 1
}

fn compose(rng: &mut ChaCha8Rng, code: usize, collapse_code0: bool) -> String {
    let source = if collapse_code0 && code == 0 {
        if rng.random_bool(0.5) {
            2
        } else {
            5
        }
    } else {
        code
    };
    let mut words: Vec<&str> = Vec::new();
    for _ in 0..rng.random_range(3..=6) {
        words.push(LEXICON[source].choose(rng).unwrap());
    }
    for _ in 0..rng.random_range(1..=4) {
        words.push(FILLER.choose(rng).unwrap());
    }
    if rng.random_bool(0.15) {
        let other = rng.random_range(0..NUM_LABELS);
        words.push(LEXICON[other].choose(rng).unwrap());
    }
    let n = words.len();
    for i in (1..n).rev() {
        let j = rng.random_range(0..=i);
        words.swap(i, j);
    }
    let mut text = words.join(" ");
    if let Some(first) = text.get(..1) {
        text = first.to_uppercase() + &text[1..];
    }
    if rng.random_bool(0.3) {
        text.push(' ');
        text.push_str(EMOJI.choose(rng).unwrap());
    }
    text
}

pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let span = (cfg.window.end - cfg.window.start).num_seconds().max(1);
    let at = |secs: i64| -> DateTime<Utc> { cfg.window.start + Duration::seconds(secs) };

    let videos: Vec<VideoRef> = (0..cfg.videos)
        .map(|i| VideoRef {
            video_id: format!("vid{i:08}"),
            title: format!("Noticias del conflicto, parte {}", i + 1),
            channel: format!("Canal {}", i % 5 + 1),
            matched_query: cfg.queries[i % cfg.queries.len().max(1)].clone(),
            published_at: at(span * i as i64 / cfg.videos.max(1) as i64),
        })
        .collect();
    let disabled: Vec<String> = videos
        .iter()
        .rev()
        .take(cfg.disabled_videos.min(videos.len().saturating_sub(1)))
        .map(|v| v.video_id.clone())
        .collect();
    let open: Vec<&VideoRef> = videos.iter().filter(|v| !disabled.contains(&v.video_id)).collect();

    let mut comments = Vec::with_capacity(cfg.comments);
    let mut gold = BTreeMap::new();
    while comments.len() < cfg.comments && !open.is_empty() {
        let i = comments.len();
        let video = open[rng.random_range(0..open.len())];
        let mut secs = rng.random_range(0..span);
        let mut weights = cfg.label_weights;
        if secs / 86_400 >= cfg.late_day {
            weights[StanceLabel::AntiIsrael.index()] *= cfg.late_boost;
        }
        let code = pick_label(&mut rng, &weights);
        let mut text = compose(&mut rng, code, cfg.collapse_code0);
        let mut like_count = rng.random_range(0..20u64);
        if rng.random_bool(0.05) {
            like_count += rng.random_range(0..2000);
        }
        if rng.random_bool(cfg.noise_fraction) {
            match rng.random_range(0..3) {
                0 => text = EMOJI.choose(&mut rng).unwrap().repeat(3),
                1 => secs = span + rng.random_range(1..86_400 * 3),
                _ => {
                    if let Some(prev) = comments.last().cloned() {
                        let mut dup: Comment = prev;
                        dup.comment_id = format!("Ugx{i:08x}");
                        gold.insert(dup.comment_id.clone(), gold[&comments.last().unwrap().comment_id]);
                        comments.push(dup);
                        continue;
                    }
                }
            }
        }
        let c = Comment {
            comment_id: format!("Ugx{i:08x}"),
            author: format!("@usuario{}", rng.random_range(0..1500)),
            published_at: at(secs),
            like_count,
            text,
            video_id: video.video_id.clone(),
            is_public: true,
        };
        gold.insert(c.comment_id.clone(), code as u8);
        comments.push(c);
    }

    SynthCorpus {
        queries: cfg.queries.clone(),
        videos,
        disabled,
        comments,
        gold,
    }
}

impl SynthCorpus {
    /// Mock API responses serving this corpus. Every query finds its own
    /// videos plus the first video of the next query, so discovery overlaps.
    pub fn fixture(&self, search_page_size: usize, thread_page_size: usize) -> MockFixture {
        let mut fx = MockFixture::new();
        for (qi, q) in self.queries.iter().enumerate() {
            let mut found: Vec<VideoRef> = self.videos.iter().filter(|v| &v.matched_query == q).cloned().collect();
            let next = &self.queries[(qi + 1) % self.queries.len()];
            if let Some(extra) = self.videos.iter().find(|v| &v.matched_query == next && next != q) {
                found.push(extra.clone());
            }
            fx.search_pages(q, &found, search_page_size);
        }
        for v in &self.videos {
            if self.disabled.contains(&v.video_id) {
                fx.comments_disabled(&v.video_id);
            } else {
                let mine: Vec<Comment> = self.comments.iter().filter(|c| c.video_id == v.video_id).cloned().collect();
                fx.thread_pages(&v.video_id, &mine, thread_page_size);
            }
        }
        fx
    }

    /// Gold labels as `comment_id,code` CSV.
    pub fn write_gold(&self, path: &Path) -> Result<(), CorpusError> {
        crate::corpus::write_atomically(path, |w| {
            use std::io::Write;
            writeln!(w, "comment_id,code")?;
            for (id, code) in &self.gold {
                writeln!(w, "{id},{code}")?;
            }
            Ok(())
        })
    }
}

pub fn read_gold(path: &Path) -> Result<BTreeMap<String, u8>, CorpusError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| CorpusError::Io {
        path: path.to_path_buf(),
        source: std::io::Error::other(e),
    })?;
    let mut out = BTreeMap::new();
    for (line, rec) in rdr.deserialize::<(String, u8)>().enumerate() {
        let (id, code) = rec.map_err(|e| CorpusError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::InvalidData, format!("row {}: {e}", line + 2)),
        })?;
        out.insert(id, code);
    }
    Ok(out)
}
