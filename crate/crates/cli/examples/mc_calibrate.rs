// scratch calibration harness for the Monte Carlo ordering criterion
use gncqr::calendar::Horizon;
use gncqr::evaluation::{QuantileScorePanel, WeightScheme};
use gncqr::solver::ConstraintMode;
use gncqr::synthetic::{generate, SyntheticSpec};
use gncqr::tuning::{make_plan, select_alpha};
use gncqr::{
    build_panel, fit_independent, fit_joint, make_almon_map, to_calendar_weeks, AlmonMap,
    HighFreqSeries, HighFreqSpec, MixedFrequencyDataset, QuantileGrid,
};

fn panel_for(seed: u64, quarters: usize, vol: f64, loc: f64, noise: f64, persistence: f64) -> MixedFrequencyDataset {
    let data = generate(&SyntheticSpec {
        quarters,
        seed,
        vol_effect: vol,
        location_effect: loc,
        noise,
        persistence,
        signal_lag_weeks: 5,
        ..SyntheticSpec::default()
    });
    let weekly = to_calendar_weeks(&data.weekly).unwrap();
    build_panel(
        &data.target,
        &[
            HighFreqSpec { series: HighFreqSeries::Weekly(weekly), lags: 12 },
            HighFreqSpec { series: HighFreqSeries::Monthly(data.monthly), lags: 6 },
        ],
        Horizon::from_weeks(5),
        1,
    )
    .unwrap()
}

fn mean_w1(fit: &gncqr::QuantilePanelFit, test: &MixedFrequencyDataset, grid: &QuantileGrid) -> f64 {
    let preds = fit.predict_panel(test).unwrap();
    let y: Vec<f64> = test.target.to_vec();
    let panel = QuantileScorePanel::from_predictions(&y, &preds, grid, "mc").unwrap();
    let s = panel.qwcrps_series(WeightScheme::Equal);
    s.iter().sum::<f64>() / s.len() as f64
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let reps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(30);
    let quarters: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);
    let vol: f64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1.0);
    let train_frac: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.65);
    let persistence: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.9);
    let loc: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(-0.8);
    let noise: f64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(1.5);
    let grid = QuantileGrid::deciles_with_quartiles();
    let midas: Vec<Option<AlmonMap>> = vec![
        Some(make_almon_map(12, 3, true).unwrap()),
        Some(make_almon_map(6, 3, true).unwrap()),
    ];
    let flat: Vec<Option<AlmonMap>> = vec![
        Some(make_almon_map(12, 0, false).unwrap()),
        Some(make_almon_map(6, 0, false).unwrap()),
    ];
    let mut g_le_m = 0;
    let mut m_le_q = 0;
    let mut both = 0;
    let start = std::time::Instant::now();
    for r in 0..reps {
        let panel = panel_for(1000 + r as u64, quarters, vol, loc, noise, persistence);
        let t = panel.rows();
        let n_train = (t as f64 * train_frac) as usize;
        let train_rows: Vec<usize> = (0..n_train).collect();
        let test_rows: Vec<usize> = (n_train..t).collect();
        let train = panel.subset(&train_rows);
        let test = panel.subset(&test_rows);

        let plan = make_plan(n_train, 5, Horizon::from_weeks(5)).unwrap();
        let sel = select_alpha(&train, &midas, &grid, &[0.5, 1.0, 2.0], &plan, WeightScheme::Equal).unwrap();
        let gncqr = fit_joint(&train, &midas, &grid, ConstraintMode::Adaptive(sel.chosen_alpha)).unwrap();
        let midas_qr = fit_independent(&train, &midas, &grid).unwrap();
        let qr = fit_independent(&train, &flat, &grid).unwrap();

        let sg = mean_w1(&gncqr, &test, &grid);
        let sm = mean_w1(&midas_qr, &test, &grid);
        let sq = mean_w1(&qr, &test, &grid);
        if sg <= sm { g_le_m += 1; }
        if sm <= sq { m_le_q += 1; }
        if sg <= sm && sm <= sq { both += 1; }
    }
    println!(
        "reps={reps} q={quarters} vol={vol} tf={train_frac} pers={persistence} loc={loc} noise={noise}: gncqr<=midas {g_le_m}, midas<=qr {m_le_q}, full ordering {both} ({:.0}%), elapsed {:?}",
        100.0 * both as f64 / reps as f64,
        start.elapsed()
    );
}
