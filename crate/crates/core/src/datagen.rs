//! Seeded synthetic datasets: the shared-feature toy problem, multi-channel
//! target/confuser/ground scenes and multi-look stair-structured samples.

use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::data::{LabeledDataset, Samples, Split};
use crate::error::Result;
use crate::mat::{normalize_columns, Mat};
use crate::tensor3::Tensor3;

/// Ground-truth bases behind the shared-feature toy data.
#[derive(Debug, Clone)]
pub struct SharedToyTruth {
    /// One `d × elements` basis per class.
    pub class_elements: Vec<Mat>,
    /// The `d × shared` basis common to every class.
    pub shared_elements: Mat,
}

#[derive(Debug, Clone)]
pub struct SharedToyConfig {
    pub n_per_class: usize,
    pub train_per_class: usize,
    pub noise_sd: f64,
    pub elements_per_class: usize,
    pub shared_elements: usize,
}

impl Default for SharedToyConfig {
    fn default() -> Self {
        Self {
            n_per_class: 1000,
            train_per_class: 200,
            noise_sd: 0.05,
            elements_per_class: 3,
            shared_elements: 2,
        }
    }
}

const TOY_GRID: usize = 20;
const TOY_CLASSES: usize = 4;

fn toy_blob(rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Array1<f64> {
    let mut v = Array1::<f64>::zeros(TOY_GRID * TOY_GRID);
    for r in rows {
        for c in cols.clone() {
            v[r * TOY_GRID + c] = 1.0;
        }
    }
    let n = v.dot(&v).sqrt();
    v / n
}

/// Four classes of 20×20 patterns: each sample is a non-negative random
/// combination of its class elements and the shared elements plus Gaussian
/// noise. The first `train_per_class` samples of each class form the train
/// split, the rest the test split.
pub fn gen_shared_toy(
    seed: u64,
    cfg: &SharedToyConfig,
) -> Result<(LabeledDataset, LabeledDataset, SharedToyTruth)> {
    let dim = TOY_GRID * TOY_GRID;
    let mut class_elements = Vec::with_capacity(TOY_CLASSES);
    for c in 0..TOY_CLASSES {
        let mut basis = Mat::zeros((dim, cfg.elements_per_class));
        for e in 0..cfg.elements_per_class {
            let row0 = c * 5;
            let col0 = (e * 6) % (TOY_GRID - 5);
            basis
                .column_mut(e)
                .assign(&toy_blob(row0..row0 + 5, col0..col0 + 5));
        }
        class_elements.push(basis);
    }
    let mut shared = Mat::zeros((dim, cfg.shared_elements));
    for s in 0..cfg.shared_elements {
        let rows = s * (TOY_GRID / cfg.shared_elements.max(1));
        let span = TOY_GRID / cfg.shared_elements.max(1);
        shared
            .column_mut(s)
            .assign(&toy_blob(rows..rows + span, 17..TOY_GRID));
    }
    let truth = SharedToyTruth {
        class_elements,
        shared_elements: shared,
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, cfg.noise_sd.max(f64::MIN_POSITIVE)).unwrap();

    let total = cfg.n_per_class * TOY_CLASSES;
    let mut samples = Mat::zeros((dim, total));
    let mut labels = Vec::with_capacity(total);
    for c in 0..TOY_CLASSES {
        for i in 0..cfg.n_per_class {
            let j = c * cfg.n_per_class + i;
            let mut col = Array1::<f64>::zeros(dim);
            for e in 0..cfg.elements_per_class {
                let a: f64 = rng.gen_range(0.2..1.2);
                col.scaled_add(a, &truth.class_elements[c].column(e));
            }
            for s in 0..cfg.shared_elements {
                let b: f64 = rng.gen_range(0.2..1.2);
                col.scaled_add(b, &truth.shared_elements.column(s));
            }
            if cfg.noise_sd > 0.0 {
                for v in col.iter_mut() {
                    *v += noise.sample(&mut rng);
                }
            } else {
                // keep the rng stream aligned so the clean signal part is
                // identical across noise settings
                for _ in 0..dim {
                    let _: f64 = noise.sample(&mut rng);
                }
            }
            samples.column_mut(j).assign(&col);
            labels.push(c + 1);
        }
    }

    // split: first train_per_class of each class train, rest test
    let mut train_cols = Vec::new();
    let mut test_cols = Vec::new();
    for c in 0..TOY_CLASSES {
        for i in 0..cfg.n_per_class {
            let j = c * cfg.n_per_class + i;
            if i < cfg.train_per_class {
                train_cols.push(j);
            } else {
                test_cols.push(j);
            }
        }
    }
    let gather = |cols: &[usize], split: Split| -> Result<LabeledDataset> {
        let mut m = Mat::zeros((dim, cols.len()));
        let mut l = Vec::with_capacity(cols.len());
        for (jj, &j) in cols.iter().enumerate() {
            m.column_mut(jj).assign(&samples.column(j));
            l.push(labels[j]);
        }
        LabeledDataset::new(Samples::Single(m), l, split)
    };

    Ok((
        gather(&train_cols, Split::Train)?,
        gather(&test_cols, Split::Test)?,
        truth,
    ))
}

#[derive(Debug, Clone)]
pub struct MultichannelConfig {
    pub targets: usize,
    pub confuser_sets: usize,
    pub channels: usize,
    pub noise_level: f64,
    pub dim: usize,
    pub atoms_per_class: usize,
    pub ground_atoms: usize,
    pub train_per_class: usize,
    pub test_per_class: usize,
    pub train_grounds: usize,
}

impl Default for MultichannelConfig {
    fn default() -> Self {
        Self {
            targets: 3,
            confuser_sets: 2,
            channels: 2,
            noise_level: 1.0,
            dim: 60,
            atoms_per_class: 4,
            train_per_class: 20,
            test_per_class: 25,
            ground_atoms: 5,
            train_grounds: 20,
        }
    }
}

/// Multi-channel scene generator. Train split: clean target samples for
/// classes `1..=targets`, known confusers folded into class `targets + 1`,
/// and pure ground samples tagged 0. Test split: noisy targets plus the
/// held-out confuser set (tagged 0), both corrupted by ground mixes scaled
/// by `noise_level`.
pub fn gen_multichannel_targets(
    seed: u64,
    cfg: &MultichannelConfig,
) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let nch = cfg.channels.max(1);
    let dim = cfg.dim;

    let mut draw_atoms = |count: usize| -> Vec<Mat> {
        (0..nch)
            .map(|_| {
                let mut m = Mat::zeros((dim, count));
                for j in 0..count {
                    for i in 0..dim {
                        m[[i, j]] = gauss.sample(&mut rng);
                    }
                }
                normalize_columns(&m)
            })
            .collect()
    };

    // latent atoms: targets, confuser sets, grounds (per channel)
    let target_atoms: Vec<Vec<Mat>> = (0..cfg.targets).map(|_| draw_atoms(cfg.atoms_per_class)).collect();
    let confuser_atoms: Vec<Vec<Mat>> = (0..cfg.confuser_sets)
        .map(|_| draw_atoms(cfg.atoms_per_class))
        .collect();
    let ground_atoms: Vec<Mat> = draw_atoms(cfg.ground_atoms);

    let mix = |rng: &mut ChaCha8Rng, atoms: &[Mat], per_channel: bool, weight_lo: f64| -> Vec<Array1<f64>> {
        // pick two atoms, weight them; channel-dependent weights exercise
        // tube structure without tying every channel to one coefficient
        let k = atoms[0].ncols();
        let a1 = rng.gen_range(0..k);
        let a2 = (a1 + 1 + rng.gen_range(0..k.max(2) - 1)) % k;
        let base1: f64 = rng.gen_range(weight_lo..1.0);
        let base2: f64 = rng.gen_range(weight_lo..1.0);
        (0..atoms.len())
            .map(|t| {
                let (w1, w2) = if per_channel {
                    (
                        base1 * rng.gen_range(0.5..1.5),
                        base2 * rng.gen_range(0.5..1.5),
                    )
                } else {
                    (base1, base2)
                };
                let mut v = Array1::zeros(atoms[t].nrows());
                v.scaled_add(w1, &atoms[t].column(a1));
                v.scaled_add(w2, &atoms[t].column(a2));
                v
            })
            .collect()
    };

    let mut train_chans = vec![Vec::<Array1<f64>>::new(); nch];
    let mut train_labels = Vec::new();
    let push_sample = |chans: &mut Vec<Vec<Array1<f64>>>, labels: &mut Vec<usize>, s: Vec<Array1<f64>>, l: usize| {
        for (t, v) in s.into_iter().enumerate() {
            chans[t].push(v);
        }
        labels.push(l);
    };

    // clean training targets
    for (c, atoms) in target_atoms.iter().enumerate() {
        for _ in 0..cfg.train_per_class {
            let s = mix(&mut rng, atoms, true, 0.3);
            push_sample(&mut train_chans, &mut train_labels, s, c + 1);
        }
    }
    // known confusers: every set except the last, folded into one class
    for atoms in confuser_atoms.iter().take(cfg.confuser_sets.saturating_sub(1)) {
        for _ in 0..cfg.train_per_class {
            let s = mix(&mut rng, atoms, true, 0.3);
            push_sample(&mut train_chans, &mut train_labels, s, cfg.targets + 1);
        }
    }
    // pure grounds
    for _ in 0..cfg.train_grounds {
        let s = mix(&mut rng, &ground_atoms, true, 0.3);
        push_sample(&mut train_chans, &mut train_labels, s, 0);
    }

    let mut test_chans = vec![Vec::<Array1<f64>>::new(); nch];
    let mut test_labels = Vec::new();
    let corrupt = |rng: &mut ChaCha8Rng, mut s: Vec<Array1<f64>>| -> Vec<Array1<f64>> {
        if cfg.noise_level > 0.0 {
            let g = mix(rng, &ground_atoms, true, 0.3);
            for (t, v) in s.iter_mut().enumerate() {
                v.scaled_add(cfg.noise_level, &g[t]);
            }
        }
        s
    };
    for (c, atoms) in target_atoms.iter().enumerate() {
        for _ in 0..cfg.test_per_class {
            let s = mix(&mut rng, atoms, true, 0.3);
            let s = corrupt(&mut rng, s);
            push_sample(&mut test_chans, &mut test_labels, s, c + 1);
        }
    }
    // held-out confuser set, unseen during training
    if let Some(atoms) = confuser_atoms.last() {
        for _ in 0..cfg.test_per_class {
            let s = mix(&mut rng, atoms, true, 0.3);
            let s = corrupt(&mut rng, s);
            push_sample(&mut test_chans, &mut test_labels, s, 0);
        }
    }

    let to_dataset = |chans: Vec<Vec<Array1<f64>>>, labels: Vec<usize>, split: Split| -> Result<LabeledDataset> {
        let n = labels.len();
        let mut mats = Vec::with_capacity(nch);
        for ch in chans {
            let mut m = Mat::zeros((dim, n));
            for (j, v) in ch.iter().enumerate() {
                m.column_mut(j).assign(v);
            }
            mats.push(m);
        }
        LabeledDataset::new(Samples::Multi(Tensor3::new(mats)?), labels, split)
    };

    Ok((
        to_dataset(train_chans, train_labels, Split::Train)?,
        to_dataset(test_chans, test_labels, Split::Test)?,
    ))
}

#[derive(Debug, Clone)]
pub struct MultilookConfig {
    pub classes: usize,
    pub views_per_class: usize,
    pub looks: usize,
    pub dim: usize,
    pub ground_atoms: usize,
    pub noise_level: f64,
    pub samples_per_class: usize,
    /// How many consecutive views blend into one look.
    pub span: usize,
}

impl Default for MultilookConfig {
    fn default() -> Self {
        Self {
            classes: 3,
            views_per_class: 8,
            looks: 2,
            dim: 50,
            ground_atoms: 4,
            noise_level: 1.0,
            samples_per_class: 20,
            span: 2,
        }
    }
}

/// One multi-look test sample: the looks, the class id and the ground-truth
/// active view offsets of the first look.
#[derive(Debug, Clone)]
pub struct MultilookSample {
    pub looks: Vec<Array1<f64>>,
    pub label: usize,
    pub base_view: usize,
}

/// Output of the multi-look generator: the view-ordered dictionary, its
/// partition (classes plus ground block) and stair-structured samples.
#[derive(Debug, Clone)]
pub struct MultilookData {
    pub dictionary: Mat,
    pub partition: crate::mat::BlockPartition,
    pub samples: Vec<MultilookSample>,
}

/// View-ordered dictionaries and samples whose consecutive looks activate
/// view indices shifted by one, forming a stair in the raw codes.
pub fn gen_multilook_stairs(seed: u64, cfg: &MultilookConfig) -> Result<MultilookData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let dim = cfg.dim;
    let k_class = cfg.views_per_class;

    let total_cols = cfg.classes * k_class + cfg.ground_atoms;
    let mut dict = Mat::zeros((dim, total_cols));
    for j in 0..total_cols {
        for i in 0..dim {
            dict[[i, j]] = gauss.sample(&mut rng);
        }
    }
    let dict = normalize_columns(&dict);
    let partition =
        crate::mat::BlockPartition::new(vec![k_class; cfg.classes], cfg.ground_atoms)?;

    let mut samples = Vec::new();
    for c in 0..cfg.classes {
        for _ in 0..cfg.samples_per_class {
            let base_view = rng.gen_range(0..k_class);
            let weights: Vec<f64> = (0..cfg.span).map(|_| rng.gen_range(0.4..1.0)).collect();
            let mut looks = Vec::with_capacity(cfg.looks);
            for look in 0..cfg.looks {
                let mut v = Array1::<f64>::zeros(dim);
                for (i, &w) in weights.iter().enumerate() {
                    let view = (base_view + look + i) % k_class;
                    let col = c * k_class + view;
                    v.scaled_add(w, &dict.column(col));
                }
                if cfg.noise_level > 0.0 && cfg.ground_atoms > 0 {
                    for g in 0..cfg.ground_atoms {
                        let w: f64 = rng.gen_range(0.0..0.5);
                        let col = cfg.classes * k_class + g;
                        v.scaled_add(cfg.noise_level * w, &dict.column(col));
                    }
                }
                looks.push(v);
            }
            samples.push(MultilookSample {
                looks,
                label: c + 1,
                base_view,
            });
        }
    }

    Ok(MultilookData {
        dictionary: dict,
        partition,
        samples,
    })
}
