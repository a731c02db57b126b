use satee::config::{Algorithm, ExperimentConfig, Preset};
use satee::experiment::{self, SweepKind};

fn tiny() -> ExperimentConfig {
    ExperimentConfig::from_toml("seeds = [0, 1, 2]\n[geometry]\nbeams = 3\n", None).unwrap()
}

#[test]
fn failures_stay_in_their_rows() {
    let mut c = tiny();
    c.params.sinr_thresholds = vec![1.0; 3];
    c.algorithms = vec![Algorithm::EeSca, Algorithm::Rzf];
    c.sweep_p_t_dbw = vec![-20.0, 14.0];
    c.sweep_p_t_w = c.sweep_p_t_dbw.iter().map(|&d| satee_core::dbw_to_watts(d)).collect();
    let rows = experiment::run_power_sweep(&c);
    assert_eq!(rows.len(), 3 * 2 * 2);
    let infeasible: Vec<_> = rows.iter().filter(|r| r.status == "infeasible").collect();
    assert!(!infeasible.is_empty());
    assert!(rows.iter().filter(|r| r.p_t_dbw == 14.0).all(|r| r.status == "ok"));
    assert!(infeasible
        .iter()
        .all(|r| r.algorithm == "EE-SCA" && r.p_t_dbw == -20.0 && r.ee == 0.0));
    let means = experiment::mean_over_seeds(&rows);
    let low = means
        .iter()
        .find(|m| m.algorithm == "EE-SCA" && m.p_t_dbw == -20.0)
        .unwrap();
    assert_eq!(low.runs, 3);
    assert_eq!(low.ok, 3 - infeasible.len());
}

#[test]
fn rows_are_sorted_by_keys() {
    let mut c = tiny();
    c.workers = 3;
    let rows = experiment::run_sweep(&c, SweepKind::Users);
    let keys: Vec<_> = rows.iter().map(|r| (r.seed, r.q)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert!(rows.iter().all(|r| r.ee >= 0.0));
}

#[test]
fn paper16_preset_sizes() {
    let c = ExperimentConfig::preset(Preset::Paper16);
    assert_eq!(c.system_params(c.params.max_power_w, 2).feeds, 16);
    assert_eq!(c.sweep_p_t_dbw, vec![0.0, 2.0, 4.0, 6.0, 8.0, 10.0, 12.0, 14.0]);
    assert_eq!(c.sweep_users_per_beam, vec![1, 2, 3, 4]);
}

#[test]
fn real_user_counts_are_capped_by_q() {
    let c = ExperimentConfig::from_toml(
        "[geometry]\nbeams = 2\n[layout]\nreal_users_per_beam = [3, 1]\nusers_per_beam = 3\n",
        None,
    )
    .unwrap();
    let h = experiment::channel_for(&c, 0, 2).unwrap();
    assert_eq!(h.virtual_mask(), &[false, false, false, true]);
}
