//! Passage-vector index with exact and approximate KNN: the semantic arm.
//!
//! Similarity is the inner product; cosine is available by normalizing at
//! add time. Approximate search is IVF-flat: a seeded k-means coarse
//! quantizer partitions the records into cells, queries probe the
//! `n_probe` cells whose centroids have the highest dot product with the
//! query, and the probed records are scored exactly. Probing every cell
//! reproduces exact search bit-for-bit.
//!
//! The on-disk format is little-endian:
//!
//! ```text
//! magic "TDMVEC01" | version u32 | dim u32 | count u64 | strings_len u64
//! count × { pid_off u64 | did_off u64 | dim × f32 }
//! string table: (u32 length, UTF-8 bytes)*   (offsets point at the length)
//! ```
//!
//! The float sections are 4-byte aligned by construction, so a loaded file
//! is memory-mapped and scanned in place.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;

use crate::binio;
use crate::defaults;
use crate::lexical::ScoredList;
use crate::parallel;
use crate::{Error, Result};

const VEC_MAGIC: &[u8; 8] = b"TDMVEC01";
const VEC_VERSION: u32 = 1;
const ANN_MAGIC: &[u8; 8] = b"TDMANN01";
const ANN_VERSION: u32 = 1;
const HEADER_LEN: usize = 32;

/// Work unit for the chunked scans; fixed so the reduction order (and
/// therefore the output) is identical with and without the `parallel`
/// feature.
const SCAN_CHUNK: usize = 4096;

/// One retrieved passage.
#[derive(Debug, Clone, PartialEq)]
pub struct PassageHit {
    pub passage_id: String,
    pub doc_id: String,
    pub score: f32,
}

/// IVF coarse quantizer: centroids plus a cell assignment per record.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnState {
    pub n_centroids: usize,
    pub seed: u64,
    /// `n_centroids × dim`, row-major.
    centroids: Vec<f32>,
    /// Record index lists per cell.
    cells: Vec<Vec<u32>>,
}

impl AnnState {
    pub fn centroid(&self, c: usize) -> &[f32] {
        let dim = self.centroids.len() / self.n_centroids;
        &self.centroids[c * dim..(c + 1) * dim]
    }

    pub fn cell(&self, c: usize) -> &[u32] {
        &self.cells[c]
    }
}

enum Storage {
    Owned(Vec<f32>),
    Mapped { map: memmap2::Mmap, stride: usize },
}

/// Immutable-after-build passage vector index. All vectors share one
/// dimension; passage ids are unique and each maps to its document id.
pub struct VectorIndex {
    dim: usize,
    count: usize,
    storage: Storage,
    pids: Vec<String>,
    dids: Vec<String>,
    pid_set: HashMap<String, u32>,
    ann: Option<AnnState>,
}

impl std::fmt::Debug for VectorIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("VectorIndex")
            .field("dim", &self.dim)
            .field("count", &self.count)
            .field("mapped", &matches!(self.storage, Storage::Mapped { .. }))
            .field("ann", &self.ann.as_ref().map(|a| a.n_centroids))
            .finish()
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut s = 0.0f32;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

fn l2_sq(a: &[f32], b: &[f32]) -> f32 {
    let mut s = 0.0f32;
    for i in 0..a.len() {
        let d = a[i] - b[i];
        s += d * d;
    }
    s
}

impl VectorIndex {
    pub fn new(dim: usize) -> Result<VectorIndex> {
        if dim == 0 {
            return Err(Error::invalid_param("dim", "must be > 0"));
        }
        Ok(VectorIndex {
            dim,
            count: 0,
            storage: Storage::Owned(Vec::new()),
            pids: Vec::new(),
            dids: Vec::new(),
            pid_set: HashMap::new(),
            ann: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn passage_id(&self, i: usize) -> &str {
        &self.pids[i]
    }

    pub fn doc_id(&self, i: usize) -> &str {
        &self.dids[i]
    }

    /// The record's vector, viewed in place (mmap'd indexes included).
    pub fn vector(&self, i: usize) -> &[f32] {
        debug_assert!(i < self.count);
        match &self.storage {
            Storage::Owned(v) => &v[i * self.dim..(i + 1) * self.dim],
            Storage::Mapped { map, stride } => {
                let start = HEADER_LEN + i * stride + 16;
                let bytes = &map[start..start + 4 * self.dim];
                debug_assert_eq!(bytes.as_ptr() as usize % 4, 0, "mmap float misalignment");
                // The format guarantees 4-byte alignment of every float
                // section and the loader verified the platform is
                // little-endian, so the reinterpretation is sound.
                unsafe {
                    std::slice::from_raw_parts(bytes.as_ptr() as *const f32, self.dim)
                }
            }
        }
    }

    /// Insert one record. Invalidates any built ANN state.
    pub fn add(
        &mut self,
        passage_id: &str,
        doc_id: &str,
        vector: &[f32],
        normalize: bool,
    ) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: vector.len(),
            });
        }
        if self.pid_set.contains_key(passage_id) {
            return Err(Error::DuplicatePassageId(passage_id.to_string()));
        }
        let mut v = vector.to_vec();
        if normalize {
            let norm = dot(&v, &v).sqrt();
            if norm == 0.0 {
                return Err(Error::invalid_param(
                    "vector",
                    format!("cannot normalize the zero vector (passage {passage_id})"),
                ));
            }
            for x in &mut v {
                *x /= norm;
            }
        }
        self.materialize();
        let Storage::Owned(store) = &mut self.storage else {
            unreachable!("materialize() produced owned storage");
        };
        store.extend_from_slice(&v);
        self.pid_set.insert(passage_id.to_string(), self.count as u32);
        self.pids.push(passage_id.to_string());
        self.dids.push(doc_id.to_string());
        self.count += 1;
        self.ann = None;
        Ok(())
    }

    /// Copy mmap-backed vectors into owned storage (needed before mutation).
    fn materialize(&mut self) {
        if let Storage::Mapped { .. } = self.storage {
            let mut owned = Vec::with_capacity(self.count * self.dim);
            for i in 0..self.count {
                owned.extend_from_slice(self.vector(i));
            }
            self.storage = Storage::Owned(owned);
        }
    }

    /// Exact top-k by inner product, descending, ties by ascending
    /// passage_id. Returns `min(k, len)` hits.
    pub fn knn_exact(&self, query: &[f32], k: usize) -> Result<Vec<PassageHit>> {
        self.check_query(query, k)?;
        let indices: Vec<u32> = (0..self.count as u32).collect();
        Ok(self.scan_top_k(query, k, &indices))
    }

    /// Build the IVF coarse quantizer: seeded k-means over all records,
    /// Lloyd iterations capped at [`defaults::KMEANS_MAX_ITERS`].
    /// Deterministic for a fixed seed.
    pub fn build_ann(&mut self, n_centroids: usize, seed: u64) -> Result<()> {
        if n_centroids == 0 {
            return Err(Error::invalid_param("n_centroids", "must be ≥ 1"));
        }
        if n_centroids > self.count {
            return Err(Error::invalid_param(
                "n_centroids",
                format!("{n_centroids} centroids but only {} records", self.count),
            ));
        }
        let dim = self.dim;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let init = rand::seq::index::sample(&mut rng, self.count, n_centroids);
        let mut centroids: Vec<f32> = Vec::with_capacity(n_centroids * dim);
        for i in init.iter() {
            centroids.extend_from_slice(self.vector(i));
        }

        let mut assignment: Vec<u32> = vec![0; self.count];
        for _ in 0..defaults::KMEANS_MAX_ITERS {
            // Assignment step: nearest centroid by L2, ties to the lowest
            // cell index. Distances are kept for empty-cell reseeding.
            let assigned: Vec<(u32, f32)> = parallel::map_indices(self.count, |i| {
                let v = self.vector(i);
                let mut best = 0u32;
                let mut best_d = f32::INFINITY;
                for c in 0..n_centroids {
                    let d = l2_sq(v, &centroids[c * dim..(c + 1) * dim]);
                    if d < best_d {
                        best_d = d;
                        best = c as u32;
                    }
                }
                (best, best_d)
            });
            let new_assignment: Vec<u32> = assigned.iter().map(|&(c, _)| c).collect();

            // Update step: per-chunk partial sums folded in chunk order so
            // the result is identical with and without rayon.
            let idx_list: Vec<u32> = (0..self.count as u32).collect();
            let partials = parallel::map_chunks(&idx_list, SCAN_CHUNK, |chunk_no, chunk| {
                let mut sums = vec![0.0f64; n_centroids * dim];
                let mut counts = vec![0u64; n_centroids];
                let base = chunk_no * SCAN_CHUNK;
                for (off, &i) in chunk.iter().enumerate() {
                    let c = new_assignment[base + off] as usize;
                    debug_assert_eq!(i as usize, base + off);
                    let v = self.vector(i as usize);
                    for (s, &x) in sums[c * dim..(c + 1) * dim].iter_mut().zip(v) {
                        *s += x as f64;
                    }
                    counts[c] += 1;
                }
                (sums, counts)
            });
            let mut sums = vec![0.0f64; n_centroids * dim];
            let mut counts = vec![0u64; n_centroids];
            for (ps, pc) in partials {
                for (a, b) in sums.iter_mut().zip(&ps) {
                    *a += b;
                }
                for (a, b) in counts.iter_mut().zip(&pc) {
                    *a += b;
                }
            }

            let mut taken: Vec<bool> = vec![false; self.count];
            for c in 0..n_centroids {
                if counts[c] > 0 {
                    for d in 0..dim {
                        centroids[c * dim + d] = (sums[c * dim + d] / counts[c] as f64) as f32;
                    }
                } else {
                    // Reseed an empty cell with the record farthest from its
                    // own centroid (first strict maximum; deterministic).
                    let mut far = 0usize;
                    let mut far_d = f32::NEG_INFINITY;
                    for (i, &(_, d)) in assigned.iter().enumerate() {
                        if !taken[i] && d > far_d {
                            far_d = d;
                            far = i;
                        }
                    }
                    taken[far] = true;
                    let v = self.vector(far).to_vec();
                    centroids[c * dim..(c + 1) * dim].copy_from_slice(&v);
                }
            }

            let converged = new_assignment == assignment;
            assignment = new_assignment;
            if converged {
                break;
            }
        }

        let mut cells: Vec<Vec<u32>> = vec![Vec::new(); n_centroids];
        for (i, &c) in assignment.iter().enumerate() {
            cells[c as usize].push(i as u32);
        }
        self.ann = Some(AnnState {
            n_centroids,
            seed,
            centroids,
            cells,
        });
        Ok(())
    }

    pub fn ann(&self) -> Option<&AnnState> {
        self.ann.as_ref()
    }

    /// Approximate top-k: exact scoring restricted to the records of the
    /// `n_probe` cells whose centroids best match the query (descending
    /// dot product). `n_probe == n_centroids` reduces to [`knn_exact`].
    ///
    /// [`knn_exact`]: VectorIndex::knn_exact
    pub fn knn_approx(&self, query: &[f32], k: usize, n_probe: usize) -> Result<Vec<PassageHit>> {
        self.check_query(query, k)?;
        let ann = self.ann.as_ref().ok_or(Error::AnnNotBuilt)?;
        if n_probe == 0 || n_probe > ann.n_centroids {
            return Err(Error::invalid_param(
                "n_probe",
                format!("must be within 1..={}, got {n_probe}", ann.n_centroids),
            ));
        }
        let mut order: Vec<usize> = (0..ann.n_centroids).collect();
        let scores: Vec<f32> = (0..ann.n_centroids)
            .map(|c| dot(query, ann.centroid(c)))
            .collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        let mut candidates: Vec<u32> = Vec::new();
        for &c in order.iter().take(n_probe) {
            candidates.extend_from_slice(ann.cell(c));
        }
        candidates.sort_unstable();
        Ok(self.scan_top_k(query, k, &candidates))
    }

    fn check_query(&self, query: &[f32], k: usize) -> Result<()> {
        if query.len() != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: query.len(),
            });
        }
        if k == 0 {
            return Err(Error::invalid_param("k", "must be > 0"));
        }
        if self.count == 0 {
            return Err(Error::invalid_param("index", "no records to search"));
        }
        Ok(())
    }

    /// Exact top-k over a candidate id set: chunked scan, per-chunk top-k,
    /// ordered merge. The comparator (score desc, passage_id asc) is total,
    /// so the result does not depend on the chunking.
    fn scan_top_k(&self, query: &[f32], k: usize, candidates: &[u32]) -> Vec<PassageHit> {
        let tops = parallel::map_chunks(candidates, SCAN_CHUNK, |_, chunk| {
            let mut scored: Vec<(f32, u32)> = chunk
                .iter()
                .map(|&i| (dot(query, self.vector(i as usize)), i))
                .collect();
            scored.sort_by(|a, b| {
                b.0.total_cmp(&a.0)
                    .then_with(|| self.pids[a.1 as usize].cmp(&self.pids[b.1 as usize]))
            });
            scored.truncate(k);
            scored
        });
        let mut merged: Vec<(f32, u32)> = tops.into_iter().flatten().collect();
        merged.sort_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then_with(|| self.pids[a.1 as usize].cmp(&self.pids[b.1 as usize]))
        });
        merged.truncate(k);
        merged
            .into_iter()
            .map(|(score, i)| PassageHit {
                passage_id: self.pids[i as usize].clone(),
                doc_id: self.dids[i as usize].clone(),
                score,
            })
            .collect()
    }

    /// Write the records in the documented little-endian file format.
    /// Deterministic: the same records produce the same bytes.
    pub fn save(&self, path: &Path) -> Result<()> {
        // Intern strings first so the header can carry the table length.
        let mut table: Vec<u8> = Vec::new();
        let mut offsets: HashMap<String, u64> = HashMap::new();
        let mut offset_of = |s: &str, table: &mut Vec<u8>| -> Result<u64> {
            if let Some(&o) = offsets.get(s) {
                return Ok(o);
            }
            let o = table.len() as u64;
            if s.len() > u32::MAX as usize {
                return Err(Error::file_format(path, "string too long"));
            }
            table.extend_from_slice(&(s.len() as u32).to_le_bytes());
            table.extend_from_slice(s.as_bytes());
            offsets.insert(s.to_string(), o);
            Ok(o)
        };
        let mut record_offs: Vec<(u64, u64)> = Vec::with_capacity(self.count);
        for i in 0..self.count {
            let p = offset_of(&self.pids[i], &mut table)?;
            let d = offset_of(&self.dids[i], &mut table)?;
            record_offs.push((p, d));
        }

        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        binio::write_header(&mut w, VEC_MAGIC, VEC_VERSION, path)?;
        binio::write_u32(&mut w, self.dim as u32, path)?;
        binio::write_u64(&mut w, self.count as u64, path)?;
        binio::write_u64(&mut w, table.len() as u64, path)?;
        for i in 0..self.count {
            let (p, d) = record_offs[i];
            binio::write_u64(&mut w, p, path)?;
            binio::write_u64(&mut w, d, path)?;
            for &x in self.vector(i) {
                binio::write_f32(&mut w, x, path)?;
            }
        }
        w.write_all(&table).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Memory-map a vector file. The vectors stay on disk and are scanned
    /// in place; ids are materialized. (On a big-endian host the floats are
    /// decoded into memory instead.)
    pub fn load(path: &Path) -> Result<VectorIndex> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let map = unsafe { memmap2::Mmap::map(&file) }.map_err(|e| Error::io(path, e))?;
        if map.len() < HEADER_LEN {
            return Err(Error::file_format(path, "file shorter than header"));
        }
        {
            let mut head = &map[..HEADER_LEN];
            binio::expect_header(&mut head, VEC_MAGIC, VEC_VERSION, path)?;
        }
        let dim = u32::from_le_bytes(map[12..16].try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(map[16..24].try_into().unwrap()) as usize;
        let strings_len = u64::from_le_bytes(map[24..32].try_into().unwrap()) as usize;
        if dim == 0 {
            return Err(Error::file_format(path, "dim must be > 0"));
        }
        let stride = 16 + 4 * dim;
        let expected = HEADER_LEN + count * stride + strings_len;
        if map.len() != expected {
            return Err(Error::file_format(
                path,
                format!("file is {} bytes, layout implies {expected}", map.len()),
            ));
        }
        let table = &map[HEADER_LEN + count * stride..];
        let read_string = |off: u64| -> Result<String> {
            let off = off as usize;
            if off + 4 > table.len() {
                return Err(Error::file_format(path, format!("string offset {off} out of range")));
            }
            let len = u32::from_le_bytes(table[off..off + 4].try_into().unwrap()) as usize;
            let bytes = table
                .get(off + 4..off + 4 + len)
                .ok_or_else(|| Error::file_format(path, format!("string at {off} truncated")))?;
            String::from_utf8(bytes.to_vec())
                .map_err(|e| Error::file_format(path, format!("invalid UTF-8 at {off}: {e}")))
        };

        let mut pids = Vec::with_capacity(count);
        let mut dids = Vec::with_capacity(count);
        let mut pid_set = HashMap::with_capacity(count);
        for i in 0..count {
            let base = HEADER_LEN + i * stride;
            let p_off = u64::from_le_bytes(map[base..base + 8].try_into().unwrap());
            let d_off = u64::from_le_bytes(map[base + 8..base + 16].try_into().unwrap());
            let pid = read_string(p_off)?;
            let did = read_string(d_off)?;
            if pid_set.insert(pid.clone(), i as u32).is_some() {
                return Err(Error::DuplicatePassageId(pid));
            }
            pids.push(pid);
            dids.push(did);
        }

        let storage = if cfg!(target_endian = "little") {
            Storage::Mapped { map, stride }
        } else {
            let mut owned = Vec::with_capacity(count * dim);
            for i in 0..count {
                let base = HEADER_LEN + i * stride + 16;
                for d in 0..dim {
                    let b = &map[base + 4 * d..base + 4 * d + 4];
                    owned.push(f32::from_le_bytes(b.try_into().unwrap()));
                }
            }
            Storage::Owned(owned)
        };

        Ok(VectorIndex {
            dim,
            count,
            storage,
            pids,
            dids,
            pid_set,
            ann: None,
        })
    }

    /// Persist the built ANN state to a sidecar file.
    pub fn save_ann(&self, path: &Path) -> Result<()> {
        let ann = self.ann.as_ref().ok_or(Error::AnnNotBuilt)?;
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        binio::write_header(&mut w, ANN_MAGIC, ANN_VERSION, path)?;
        binio::write_u32(&mut w, self.dim as u32, path)?;
        binio::write_u32(&mut w, ann.n_centroids as u32, path)?;
        binio::write_u64(&mut w, ann.seed, path)?;
        for &x in &ann.centroids {
            binio::write_f32(&mut w, x, path)?;
        }
        binio::write_u64(&mut w, self.count as u64, path)?;
        for cell in &ann.cells {
            binio::write_u32(&mut w, cell.len() as u32, path)?;
            for &i in cell {
                binio::write_u32(&mut w, i, path)?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Load ANN state written by [`save_ann`](VectorIndex::save_ann);
    /// validates that it matches this index's dimension and record count.
    pub fn load_ann(&mut self, path: &Path) -> Result<()> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        binio::expect_header(&mut r, ANN_MAGIC, ANN_VERSION, path)?;
        let dim = binio::read_u32(&mut r, path)? as usize;
        if dim != self.dim {
            return Err(Error::DimMismatch {
                expected: self.dim,
                got: dim,
            });
        }
        let n_centroids = binio::read_u32(&mut r, path)? as usize;
        let seed = binio::read_u64(&mut r, path)?;
        let mut centroids = vec![0.0f32; n_centroids * dim];
        for x in &mut centroids {
            *x = binio::read_f32(&mut r, path)?;
        }
        let count = binio::read_u64(&mut r, path)? as usize;
        if count != self.count {
            return Err(Error::file_format(
                path,
                format!("ANN built over {count} records, index has {}", self.count),
            ));
        }
        let mut cells = Vec::with_capacity(n_centroids);
        let mut assigned = 0usize;
        for _ in 0..n_centroids {
            let len = binio::read_u32(&mut r, path)? as usize;
            let mut cell = Vec::with_capacity(len);
            for _ in 0..len {
                let i = binio::read_u32(&mut r, path)?;
                if i as usize >= self.count {
                    return Err(Error::file_format(path, format!("record {i} out of range")));
                }
                cell.push(i);
            }
            assigned += len;
            cells.push(cell);
        }
        if assigned != self.count {
            return Err(Error::file_format(
                path,
                format!("{assigned} assignments for {} records", self.count),
            ));
        }
        self.ann = Some(AnnState {
            n_centroids,
            seed,
            centroids,
            cells,
        });
        Ok(())
    }
}

/// Sum passage-hit scores per document and rank the documents.
/// Tie-break is ascending doc_id. Score sums are accumulated in f64 in hit
/// order. Negative passage scores participate in the sum as-is.
pub fn aggregate_to_docs(hits: &[PassageHit], c: usize) -> ScoredList {
    assert!(c > 0, "result depth c must be > 0");
    let mut order: Vec<&str> = Vec::new();
    let mut sums: HashMap<&str, f64> = HashMap::new();
    for h in hits {
        let e = sums.entry(h.doc_id.as_str()).or_insert_with(|| {
            order.push(h.doc_id.as_str());
            0.0
        });
        *e += h.score as f64;
    }
    let entries: Vec<(String, f64)> = order
        .into_iter()
        .map(|d| (d.to_string(), sums[d]))
        .collect();
    let mut list = ScoredList::from_unsorted(entries);
    list.truncate(c);
    list
}
