//! Manifest ingestion: crop each annotation, draw square subsamples, embed
//! each subsample's superlevel barcode and average. Results are cached by
//! content hash and can be split per class for training.

use std::collections::{BTreeMap, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::image_io::{annotation_seed, crop, decode_image, parse_manifest, sample_patch_positions, AnnotationRecord, BBox, GrayImage};
use crate::landscape::{average_embeddings, embed, Grid, LandscapeConfig, LandscapeEmbedding};
use crate::persistence::barcode;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridRange {
    pub min: u8,
    pub max: u8,
}

/// Pipeline configuration as read from the JSON config file. Missing fields
/// take their defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub patch_size: u32,
    pub patches_per_annotation: usize,
    pub k: usize,
    pub n: usize,
    pub grid: GridRange,
    pub seed: u64,
    pub cache_dir: Option<PathBuf>,
    #[serde(rename = "C")]
    pub c: f64,
    pub train_per_class: usize,
    pub test_per_class: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let grid = Grid::default();
        Self {
            patch_size: 96,
            patches_per_annotation: 6,
            k: 5,
            n: grid.n,
            grid: GridRange {
                min: grid.min,
                max: grid.max,
            },
            seed: 0,
            cache_dir: None,
            c: 1.0,
            train_per_class: 350,
            test_per_class: 200,
        }
    }
}

impl PipelineConfig {
    pub fn landscape(&self) -> LandscapeConfig {
        LandscapeConfig {
            k: self.k,
            grid: Grid {
                min: self.grid.min,
                max: self.grid.max,
                n: self.n,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size == 0 {
            return Err(Error::Config("patch_size must be positive".into()));
        }
        if self.patches_per_annotation == 0 {
            return Err(Error::Config("patches_per_annotation must be positive".into()));
        }
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::Config("C must be a positive number".into()));
        }
        self.landscape().validate()
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_per_class: self.train_per_class,
            test_per_class: self.test_per_class,
            seed: self.seed,
        }
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Everything needed to recompute an embedding from its source image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub image_id: String,
    pub bbox: BBox,
    pub seed: u64,
    /// Top-left corners of the subsamples in image coordinates.
    pub corners: Corners,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddedAnnotation {
    /// 1-based manifest line.
    pub line: usize,
    pub label: String,
    pub embedding: LandscapeEmbedding<f64>,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordIssue {
    pub line: usize,
    pub image_id: Option<String>,
    pub message: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IngestReport {
    pub annotations: Vec<EmbeddedAnnotation>,
    pub skipped: Vec<RecordIssue>,
    pub failed: Vec<RecordIssue>,
    pub cache_hits: usize,
    /// Subsample persistence computations actually performed (cache misses
    /// only).
    pub persistence_computations: usize,
}

/// Resolves image identifiers to file bytes.
pub trait ImageSource: Sync {
    fn read(&self, image_id: &str) -> Result<Vec<u8>>;
}

/// Images stored as files relative to a base directory.
#[derive(Clone, Debug)]
pub struct DirSource {
    pub base: PathBuf,
}

impl ImageSource for DirSource {
    fn read(&self, image_id: &str) -> Result<Vec<u8>> {
        let path = self.base.join(image_id);
        std::fs::read(&path).map_err(|e| Error::io(path, e))
    }
}

impl ImageSource for HashMap<String, Vec<u8>> {
    fn read(&self, image_id: &str) -> Result<Vec<u8>> {
        self.get(image_id).cloned().ok_or_else(|| {
            Error::io(image_id, std::io::Error::new(std::io::ErrorKind::NotFound, "no such image"))
        })
    }
}

/// Top-left corners of the subsampled patches, relative to the annotation.
pub type Corners = Vec<(u32, u32)>;

/// Averaged embedding of one annotation together with its subsample corners.
pub fn embed_annotation(
    img: &GrayImage,
    bbox: BBox,
    seed: u64,
    cfg: &PipelineConfig,
) -> Result<(LandscapeEmbedding<f64>, Corners)> {
    let region = crop(img, bbox)?;
    let corners: Corners = sample_patch_positions(
        region.width(),
        region.height(),
        cfg.patches_per_annotation,
        cfg.patch_size,
        seed,
    )?
    .into_iter()
    .map(|(x, y)| (bbox.x0 + x, bbox.y0 + y))
    .collect();
    let embedding = embed_corners(img, &corners, cfg)?;
    Ok((embedding, corners))
}

/// Recomputes an embedding from explicit subsample corners.
pub fn embed_corners(img: &GrayImage, corners: &[(u32, u32)], cfg: &PipelineConfig) -> Result<LandscapeEmbedding<f64>> {
    let lcfg = cfg.landscape();
    let s = cfg.patch_size;
    let parts = corners
        .iter()
        .map(|&(x, y)| {
            let patch = crop(img, BBox::new(x, y, x + s, y + s)?)?;
            Ok(embed::<f64>(&barcode(&patch), &lcfg))
        })
        .collect::<Result<Vec<_>>>()?;
    average_embeddings(&parts)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Cache key over the image content, the annotation box, its seed and every
/// configuration field that affects the embedding.
pub fn cache_key(image_digest: &[u8], bbox: BBox, seed: u64, cfg: &PipelineConfig) -> String {
    let mut h = Sha256::new();
    h.update(b"embedding-v1");
    h.update(image_digest);
    for c in <[u32; 4]>::from(bbox) {
        h.update(c.to_le_bytes());
    }
    h.update(seed.to_le_bytes());
    h.update(cfg.patch_size.to_le_bytes());
    h.update((cfg.patches_per_annotation as u64).to_le_bytes());
    h.update((cfg.k as u64).to_le_bytes());
    h.update((cfg.n as u64).to_le_bytes());
    h.update([cfg.grid.min, cfg.grid.max]);
    hex(&h.finalize())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CacheEntry {
    offset: u64,
    len: usize,
    corners: Corners,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct CacheIndex {
    version: u32,
    entries: BTreeMap<String, CacheEntry>,
}

struct CacheState {
    index: CacheIndex,
    values: Vec<f64>,
    file: File,
    dirty: bool,
}

/// Embedding cache: `embeddings.bin` holds little-endian `f64` values and is
/// only ever appended to; `index.json` maps keys to ranges of it.
pub struct EmbeddingCache {
    dir: PathBuf,
    state: Mutex<CacheState>,
}

const CACHE_VERSION: u32 = 1;

impl EmbeddingCache {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        let bin = dir.join("embeddings.bin");
        let idx = dir.join("index.json");

        let mut file = OpenOptions::new()
            .create(true)
            .read(true)
            .append(true)
            .open(&bin)
            .map_err(|e| Error::io(&bin, e))?;
        let mut raw = Vec::new();
        file.read_to_end(&mut raw).map_err(|e| Error::io(&bin, e))?;
        if raw.len() % 8 != 0 {
            // a torn append: drop the partial value
            let keep = raw.len() - raw.len() % 8;
            log::warn!("{}: discarding {} trailing bytes", bin.display(), raw.len() - keep);
            raw.truncate(keep);
            file.set_len(keep as u64).map_err(|e| Error::io(&bin, e))?;
        }
        let values: Vec<f64> = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
            .collect();

        let mut dirty = false;
        let mut index = match std::fs::read_to_string(&idx) {
            Ok(text) => serde_json::from_str::<CacheIndex>(&text)
                .map_err(|e| Error::Cache(format!("{}: {e}", idx.display())))?,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                dirty = true;
                CacheIndex {
                    version: CACHE_VERSION,
                    entries: BTreeMap::new(),
                }
            }
            Err(e) => return Err(Error::io(&idx, e)),
        };
        if index.version != CACHE_VERSION {
            return Err(Error::Cache(format!("unsupported cache version {}", index.version)));
        }
        let before = index.entries.len();
        index
            .entries
            .retain(|_, e| e.offset as usize + e.len <= values.len());
        if index.entries.len() != before {
            dirty = true;
            log::warn!("{}: dropped {} entries past end of data", idx.display(), before - index.entries.len());
        }
        Ok(Self {
            dir,
            state: Mutex::new(CacheState {
                index,
                values,
                file,
                dirty,
            }),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn len(&self) -> usize {
        self.state.lock().expect("cache lock").index.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get(&self, key: &str) -> Option<(Vec<f64>, Corners)> {
        let st = self.state.lock().expect("cache lock");
        let e = st.index.entries.get(key)?;
        let start = e.offset as usize;
        Some((st.values[start..start + e.len].to_vec(), e.corners.clone()))
    }

    fn insert(&self, key: String, values: &[f64], corners: Corners) -> Result<()> {
        let mut st = self.state.lock().expect("cache lock");
        if st.index.entries.contains_key(&key) {
            return Ok(());
        }
        let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        let bin = self.dir.join("embeddings.bin");
        st.file.write_all(&bytes).map_err(|e| Error::io(&bin, e))?;
        let offset = st.values.len() as u64;
        st.values.extend_from_slice(values);
        st.index.entries.insert(
            key,
            CacheEntry {
                offset,
                len: values.len(),
                corners,
            },
        );
        st.dirty = true;
        Ok(())
    }

    /// Writes the index if anything was added since the last flush.
    pub fn flush(&self) -> Result<()> {
        let mut st = self.state.lock().expect("cache lock");
        if !st.dirty {
            return Ok(());
        }
        let bin = self.dir.join("embeddings.bin");
        st.file.sync_data().map_err(|e| Error::io(&bin, e))?;
        let idx = self.dir.join("index.json");
        let tmp = self.dir.join("index.json.tmp");
        let text = serde_json::to_string(&st.index)?;
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &idx).map_err(|e| Error::io(&idx, e))?;
        st.dirty = false;
        Ok(())
    }
}

enum Outcome {
    Embedded(EmbeddedAnnotation, bool),
    Skipped(RecordIssue),
    Failed(RecordIssue),
}

/// Reads a JSON Lines manifest and ingests it, resolving image paths
/// relative to the manifest's directory. Opens the cache named in the
/// config, if any.
pub fn ingest(manifest: &Path, cfg: &PipelineConfig, jobs: Option<usize>) -> Result<IngestReport> {
    let text = std::fs::read_to_string(manifest).map_err(|e| Error::io(manifest, e))?;
    let source = DirSource {
        base: manifest.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    let cache = cfg.cache_dir.as_ref().map(EmbeddingCache::open).transpose()?;
    let report = ingest_records(parse_manifest(&text), &source, cfg, cache.as_ref(), jobs)?;
    if let Some(c) = &cache {
        c.flush()?;
    }
    Ok(report)
}

/// Ingests parsed manifest records. Work is spread over `jobs` threads
/// (rayon's default when `None`); the result is in manifest order and does
/// not depend on the thread count.
pub fn ingest_records(
    records: Vec<(usize, Result<AnnotationRecord>)>,
    source: &dyn ImageSource,
    cfg: &PipelineConfig,
    cache: Option<&EmbeddingCache>,
    jobs: Option<usize>,
) -> Result<IngestReport> {
    cfg.validate()?;
    let mut outcomes: Vec<(usize, Outcome)> = Vec::with_capacity(records.len());
    let mut groups: BTreeMap<String, Vec<(usize, AnnotationRecord)>> = BTreeMap::new();
    for (line, rec) in records {
        match rec {
            Ok(r) => groups.entry(r.image_id.clone()).or_default().push((line, r)),
            Err(e) => outcomes.push((
                line,
                Outcome::Failed(RecordIssue {
                    line,
                    image_id: None,
                    message: e.to_string(),
                }),
            )),
        }
    }
    let groups: Vec<(String, Vec<(usize, AnnotationRecord)>)> = groups.into_iter().collect();

    let run = || -> Vec<(usize, Outcome)> {
        groups
            .par_iter()
            .flat_map_iter(|(image_id, recs)| process_image(image_id, recs, source, cfg, cache))
            .collect()
    };
    let computed = match jobs {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    };
    outcomes.extend(computed);
    outcomes.sort_by_key(|(line, _)| *line);

    let mut report = IngestReport::default();
    for (_, o) in outcomes {
        match o {
            Outcome::Embedded(a, hit) => {
                if hit {
                    report.cache_hits += 1;
                } else {
                    report.persistence_computations += a.provenance.corners.len();
                }
                report.annotations.push(a);
            }
            Outcome::Skipped(i) => report.skipped.push(i),
            Outcome::Failed(i) => report.failed.push(i),
        }
    }
    Ok(report)
}

fn process_image(
    image_id: &str,
    recs: &[(usize, AnnotationRecord)],
    source: &dyn ImageSource,
    cfg: &PipelineConfig,
    cache: Option<&EmbeddingCache>,
) -> Vec<(usize, Outcome)> {
    let issue = |line: usize, message: String| RecordIssue {
        line,
        image_id: Some(image_id.to_string()),
        message,
    };
    let loaded = source.read(image_id).and_then(|bytes| {
        let digest: [u8; 32] = Sha256::digest(&bytes).into();
        decode_image(&bytes).map(|img| (img, digest))
    });
    let (img, digest) = match loaded {
        Ok(x) => x,
        Err(e) => {
            log::warn!("{image_id}: {e}");
            return recs
                .iter()
                .map(|(line, _)| (*line, Outcome::Failed(issue(*line, e.to_string()))))
                .collect();
        }
    };

    recs.par_iter()
        .map(|(line, rec)| {
            let line = *line;
            let bbox = rec.bbox;
            if bbox.x1 > img.width() || bbox.y1 > img.height() {
                let msg = format!(
                    "box {:?} exceeds image {}x{}",
                    <[u32; 4]>::from(bbox),
                    img.width(),
                    img.height()
                );
                return (line, Outcome::Failed(issue(line, msg)));
            }
            if bbox.width() < cfg.patch_size || bbox.height() < cfg.patch_size {
                let msg = format!(
                    "annotation {}x{} smaller than patch size {}",
                    bbox.width(),
                    bbox.height(),
                    cfg.patch_size
                );
                log::warn!("line {line}: {msg}");
                return (line, Outcome::Skipped(issue(line, msg)));
            }
            let seed = annotation_seed(cfg.seed, image_id, bbox);
            let key = cache_key(&digest, bbox, seed, cfg);
            let lcfg = cfg.landscape();
            let cached = cache
                .and_then(|c| c.get(&key))
                .filter(|(v, _)| v.len() == lcfg.embedding_len());
            let (embedding, corners, hit) = match cached {
                Some((values, corners)) => (LandscapeEmbedding { values, config: lcfg }, corners, true),
                None => match embed_annotation(&img, bbox, seed, cfg) {
                    Ok((e, corners)) => {
                        if let Some(c) = cache {
                            if let Err(err) = c.insert(key, &e.values, corners.clone()) {
                                log::warn!("cache write failed: {err}");
                            }
                        }
                        (e, corners, false)
                    }
                    Err(e) => return (line, Outcome::Failed(issue(line, e.to_string()))),
                },
            };
            let ann = EmbeddedAnnotation {
                line,
                label: rec.label.clone(),
                embedding,
                provenance: Provenance {
                    image_id: image_id.to_string(),
                    bbox,
                    seed,
                    corners,
                },
            };
            (line, Outcome::Embedded(ann, hit))
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_per_class: 350,
            test_per_class: 200,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split<'a> {
    pub train: Vec<&'a EmbeddedAnnotation>,
    pub test: Vec<&'a EmbeddedAnnotation>,
}

impl Split<'_> {
    pub fn train_embeddings(&self) -> Vec<&[f64]> {
        self.train.iter().map(|a| a.embedding.values.as_slice()).collect()
    }

    pub fn test_embeddings(&self) -> Vec<&[f64]> {
        self.test.iter().map(|a| a.embedding.values.as_slice()).collect()
    }

    pub fn train_labels(&self) -> Vec<&str> {
        self.train.iter().map(|a| a.label.as_str()).collect()
    }

    pub fn test_labels(&self) -> Vec<&str> {
        self.test.iter().map(|a| a.label.as_str()).collect()
    }
}

/// Seed of the draw for one class within one comparison. Every class list
/// gets its own stream, so each pairwise comparison draws afresh.
fn class_seed(seed: u64, classes: &[&str], class: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    for c in classes {
        h.update((c.len() as u64).to_le_bytes());
        h.update(c.as_bytes());
    }
    h.update(b"/");
    h.update(class.as_bytes());
    u64::from_le_bytes(h.finalize()[..8].try_into().expect("digest has 32 bytes"))
}

/// Uniform draw without replacement of `train + test` annotations per class.
/// Both sets are returned class by class, each class in manifest order.
pub fn split<'a>(data: &'a [EmbeddedAnnotation], classes: &[&str], spec: &SplitSpec) -> Result<Split<'a>> {
    let need = spec.train_per_class + spec.test_per_class;
    let mut train = Vec::new();
    let mut test = Vec::new();
    for &class in classes {
        let members: Vec<&EmbeddedAnnotation> = data.iter().filter(|a| a.label == class).collect();
        if members.len() < need {
            return Err(Error::InsufficientClass {
                class: class.to_string(),
                needed: need,
                available: members.len(),
            });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(class_seed(spec.seed, classes, class));
        let picked = rand::seq::index::sample(&mut rng, members.len(), need).into_vec();
        let mut tr: Vec<usize> = picked[..spec.train_per_class].to_vec();
        let mut te: Vec<usize> = picked[spec.train_per_class..].to_vec();
        tr.sort_unstable();
        te.sort_unstable();
        train.extend(tr.into_iter().map(|i| members[i]));
        test.extend(te.into_iter().map(|i| members[i]));
    }
    Ok(Split { train, test })
}
