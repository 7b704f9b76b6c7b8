use sfipm::costmodel::{predict_variant, reconcile, KernelCosts};
use sfipm::factor::Backend;
use sfipm::ipm::{solve_qp, IpmConfig, IpmStatus, Variant};
use sfipm::problems::{gen_syqp, SyQpSpec};

fn check(n: usize, m1: usize, backend: Backend) {
    let p = gen_syqp(&SyQpSpec::new(n, m1, 1)).unwrap();
    for v in Variant::ALL {
        let cfg = IpmConfig { consistent_iterates: true, krylov_tol: 1e-10, backend, ..IpmConfig::with_strategy(v) };
        let r = solve_qp(&p, &cfg).unwrap();
        assert_eq!(r.status, IpmStatus::Optimal, "{v}: {:?}", r.diagnostics);
        let costs = KernelCosts::for_config(&p, &cfg).unwrap();
        let pred = predict_variant(v, &costs, r.n_ipm_iters, &r.per_iter_krylov).unwrap();
        let rec = reconcile(&pred, &r.ledger, backend);
        assert!(rec.pass(), "n={n} m1={m1} {v}:\n{}", rec.to_csv());
        assert_eq!(pred.total, r.ledger.total_flops(), "{v}");
    }
}

#[test]
fn all_variants_reconcile_small() {
    check(8, 4, Backend::SparseRegularized);
}

#[test]
fn all_variants_reconcile_n64() {
    check(64, 32, Backend::SparseRegularized);
}

#[test]
fn dense_backend_reconciles() {
    check(8, 4, Backend::DenseBk);
}
