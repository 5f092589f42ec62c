mod common;

use common::oracle::{self, Objective, Score, SplitMix};
use msglance::glance::{self, Aggregation, GlanceConfig, GlanceScope, Kernel};
use msglance::rng::seeded;
use msglance::ssim::{self, SsimConfig};
use msglance::Image;

fn random_image(rng: &mut SplitMix, h: usize, w: usize, ch: usize) -> Image {
    Image::new(h, w, ch, rng.vec(h * w * ch)).unwrap()
}

fn cell_weights(cfg: &GlanceConfig) -> Vec<f64> {
    match cfg.kernel {
        Kernel::Uniform => oracle::uniform_weights(cfg.n_g, cfg.m_g),
        Kernel::Gaussian { sigma } => oracle::gaussian_weights(cfg.n_g, cfg.m_g, sigma),
    }
}

/// Rebuilds the loss of `ms_glance_loss(reference, _, cfg, seeded(seed))` as an
/// explicit list of windows.
fn glance_objective(reference: &Image, cfg: &GlanceConfig, seed: u64) -> Objective {
    let (h, w, ch) = (reference.height(), reference.width(), reference.channels());
    let weights = cell_weights(cfg);
    let mut local = Vec::new();
    let mut global = Vec::new();
    if cfg.scope != GlanceScope::Global {
        let cells: Vec<usize> = (0..h * w).collect();
        local = oracle::grid_windows(&cells, h, w, ch, cfg.n_g, cfg.m_g, cfg.stride, &weights, true);
    }
    if cfg.scope != GlanceScope::Local {
        let mut rng = seeded(seed);
        let selection = glance::select_pixels(reference, cfg, &mut rng).unwrap();
        for _ in 0..cfg.shuffles {
            let grid = selection.reshuffled(&mut rng);
            let cells: Vec<usize> = grid.coords.iter().map(|c| c.row * w + c.col).collect();
            global.extend(oracle::grid_windows(
                &cells, cfg.n, cfg.m, ch, cfg.n_g, cfg.m_g, cfg.stride, &weights, true,
            ));
        }
    }
    let (kl, kg) = if cfg.aggregation == Aggregation::Separate && !local.is_empty() && !global.is_empty() {
        (0.5 / local.len() as f64, 0.5 / global.len() as f64)
    } else {
        let total = (local.len() + global.len()) as f64;
        (1.0 / total, 1.0 / total)
    };
    let score = if cfg.lc_augment {
        Score::GlanceLc { c_s: cfg.c_s }
    } else {
        Score::Glance { c_s: cfg.c_s }
    };
    let terms = local
        .into_iter()
        .map(|w| (w, kl))
        .chain(global.into_iter().map(|w| (w, kg)))
        .collect();
    Objective { terms, score }
}

fn check_glance(cfg: &GlanceConfig, h: usize, w: usize, ch: usize, seed: u64) {
    let mut gen = SplitMix(seed);
    let reference = random_image(&mut gen, h, w, ch);
    let pred = random_image(&mut gen, h, w, ch);
    let out = glance::ms_glance_loss(&reference, &pred, cfg, &mut seeded(seed)).unwrap();
    let obj = glance_objective(&reference, cfg, seed);
    let expected = obj.loss(reference.data(), pred.data());
    assert!(
        (out.loss - expected).abs() < 1e-12,
        "loss {} vs oracle {expected}",
        out.loss
    );
    let fd = obj.fd_grad(reference.data(), pred.data(), 1e-6);
    let err = oracle::max_rel_err(&out.grad, &fd, 1e-8);
    assert!(err < 1e-4, "max relative gradient error {err:e} for {cfg:?}");
}

fn small() -> GlanceConfig {
    GlanceConfig {
        n: 12,
        m: 12,
        n_g: 4,
        m_g: 4,
        shuffles: 3,
        ..GlanceConfig::default()
    }
}

#[test]
fn glance_gradient_uniform() {
    check_glance(&small(), 16, 16, 1, 1);
}

#[test]
fn glance_gradient_gaussian() {
    let cfg = GlanceConfig {
        kernel: Kernel::Gaussian { sigma: 1.5 },
        ..small()
    };
    check_glance(&cfg, 16, 16, 1, 2);
}

#[test]
fn glance_gradient_lc() {
    for kernel in [Kernel::Uniform, Kernel::Gaussian { sigma: 1.5 }] {
        let cfg = GlanceConfig {
            lc_augment: true,
            kernel,
            ..small()
        };
        check_glance(&cfg, 16, 16, 1, 3);
    }
}

#[test]
fn glance_gradient_color_and_stride() {
    let cfg = GlanceConfig { stride: 2, ..small() };
    check_glance(&cfg, 14, 15, 3, 4);
}

#[test]
fn glance_gradient_scopes_and_aggregation() {
    for scope in [GlanceScope::Local, GlanceScope::Global] {
        check_glance(&GlanceConfig { scope, ..small() }, 16, 16, 1, 5);
    }
    let cfg = GlanceConfig {
        aggregation: Aggregation::Separate,
        ..small()
    };
    check_glance(&cfg, 16, 16, 1, 6);
}

#[test]
fn glance_gradient_with_air_prior_and_shortfall() {
    let mut gen = SplitMix(7);
    let mut data = gen.vec(16 * 16);
    for (i, v) in data.iter_mut().enumerate() {
        if i % 3 == 0 {
            *v = 0.0;
        }
    }
    let reference = Image::new(16, 16, 1, data).unwrap();
    let pred = random_image(&mut gen, 16, 16, 1);
    let cfg = GlanceConfig {
        air_threshold: Some(0.01),
        n: 14,
        m: 14,
        ..small()
    };
    let out = glance::ms_glance_loss(&reference, &pred, &cfg, &mut seeded(7)).unwrap();
    let obj = glance_objective(&reference, &cfg, 7);
    assert!((out.loss - obj.loss(reference.data(), pred.data())).abs() < 1e-12);
    let fd = obj.fd_grad(reference.data(), pred.data(), 1e-6);
    assert!(oracle::max_rel_err(&out.grad, &fd, 1e-8) < 1e-4);
}

#[test]
fn glance_loss_against_constant_prediction() {
    let mut gen = SplitMix(8);
    let reference = random_image(&mut gen, 20, 20, 1);
    let pred = Image::new(20, 20, 1, vec![0.4; 400]).unwrap();
    let cfg = GlanceConfig {
        n: 16,
        m: 16,
        n_g: 8,
        m_g: 8,
        shuffles: 2,
        ..GlanceConfig::default()
    };
    let out = glance::ms_glance_loss(&reference, &pred, &cfg, &mut seeded(8)).unwrap();
    let obj = glance_objective(&reference, &cfg, 8);
    let expected = obj.loss(reference.data(), pred.data());
    assert!((out.loss - expected).abs() < 1e-12);
    // every window index is c_s / (0 + c_s) = 1 when pred has no spread
    assert!(out.loss.abs() < 1e-12);
}

#[test]
fn glance_gradient_default_windows_on_32x32() {
    let cfg = GlanceConfig {
        n: 32,
        m: 32,
        ..GlanceConfig::default()
    };
    check_glance(&cfg, 32, 32, 1, 9);
}

fn ssim_objective(h: usize, w: usize, ch: usize, cfg: &SsimConfig) -> Objective {
    let cells: Vec<usize> = (0..h * w).collect();
    let weights = oracle::gaussian_weights(cfg.window, cfg.window, cfg.sigma);
    let windows = oracle::grid_windows(&cells, h, w, ch, cfg.window, cfg.window, cfg.stride, &weights, false);
    let k = 1.0 / windows.len() as f64;
    Objective {
        terms: windows.into_iter().map(|w| (w, k)).collect(),
        score: Score::Ssim {
            c1: cfg.c1(),
            c2: cfg.c2(),
        },
    }
}

#[test]
fn ssim_matches_direct_summation() {
    let mut gen = SplitMix(10);
    for (ch, cfg) in [
        (1, SsimConfig::default()),
        (3, SsimConfig { window: 7, stride: 2, ..SsimConfig::default() }),
    ] {
        let a = random_image(&mut gen, 24, 22, ch);
        let b = random_image(&mut gen, 24, 22, ch);
        let got = ssim::ssim(&a, &b, &cfg).unwrap();
        let obj = ssim_objective(24, 22, ch, &cfg);
        assert_eq!(got.map.len(), obj.terms.len());
        for (value, (w, _)) in got.map.iter().zip(&obj.terms) {
            let expected = oracle::score(a.data(), b.data(), w, obj.score);
            assert!((value - expected).abs() < 1e-9);
        }
        let expected = 1.0 - obj.loss(a.data(), b.data());
        assert!((got.mean - expected).abs() < 1e-9);
    }
}

#[test]
fn ssim_loss_gradient() {
    let mut gen = SplitMix(11);
    for (ch, cfg) in [
        (1, SsimConfig::default()),
        (3, SsimConfig { window: 5, ..SsimConfig::default() }),
    ] {
        let a = random_image(&mut gen, 20, 20, ch);
        let b = random_image(&mut gen, 20, 20, ch);
        let out = ssim::ssim_loss_grad(&a, &b, &cfg).unwrap();
        let obj = ssim_objective(20, 20, ch, &cfg);
        assert!((out.loss - obj.loss(a.data(), b.data())).abs() < 1e-12);
        let fd = obj.fd_grad(a.data(), b.data(), 1e-6);
        let err = oracle::max_rel_err(&out.grad, &fd, 1e-8);
        assert!(err < 1e-4, "ssim gradient error {err:e} (channels {ch})");
    }
}

#[test]
fn s3im_matches_composition_and_gradient() {
    let mut gen = SplitMix(12);
    let a = random_image(&mut gen, 18, 18, 1);
    let b = random_image(&mut gen, 18, 18, 1);
    let gcfg = GlanceConfig {
        n: 16,
        m: 16,
        shuffles: 4,
        ..GlanceConfig::default()
    };
    let scfg = SsimConfig {
        window: 8,
        ..SsimConfig::default()
    };
    let out = ssim::s3im_loss(&a, &b, &gcfg, &scfg, &mut seeded(12)).unwrap();

    // composition: 1 - SSIM of the reshaped grids, averaged over reshuffles
    let mut rng = seeded(12);
    let selection = glance::select_pixels(&a, &gcfg, &mut rng).unwrap();
    let weights = oracle::gaussian_weights(8, 8, scfg.sigma);
    let mut terms = Vec::new();
    let mut composed = 0.0;
    for _ in 0..gcfg.shuffles {
        let grid = selection.reshuffled(&mut rng);
        let ga = Image::new(16, 16, 1, grid.values(&a)).unwrap();
        let gb = Image::new(16, 16, 1, grid.values(&b)).unwrap();
        composed += 1.0 - ssim::ssim(&ga, &gb, &scfg).unwrap().mean;
        let cells: Vec<usize> = grid.coords.iter().map(|c| c.row * 18 + c.col).collect();
        terms.extend(oracle::grid_windows(&cells, 16, 16, 1, 8, 8, 1, &weights, false));
    }
    composed /= gcfg.shuffles as f64;
    assert!((out.loss - composed).abs() < 1e-12);

    let k = 1.0 / terms.len() as f64;
    let obj = Objective {
        terms: terms.into_iter().map(|w| (w, k)).collect(),
        score: Score::Ssim {
            c1: scfg.c1(),
            c2: scfg.c2(),
        },
    };
    assert!((out.loss - obj.loss(a.data(), b.data())).abs() < 1e-12);
    let fd = obj.fd_grad(a.data(), b.data(), 1e-6);
    assert!(oracle::max_rel_err(&out.grad, &fd, 1e-8) < 1e-4);
}
