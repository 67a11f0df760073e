use darcy_mg::mesh::{build_hierarchy, DomainTag};
use darcy_mg::multigrid::{setup, CycleKind, MgConfig};
use darcy_mg::problem::ProblemSpec;

#[test]
fn contraction_table_sample() {
    let h = build_hierarchy(DomainTag::UnitSquare, 4).unwrap();
    let problem = ProblemSpec::darcy(DomainTag::UnitSquare);
    let config = MgConfig::default();
    let state = setup(&h, &problem, config).unwrap();
    for m in [10usize, 20, 40, 80] {
        let mut row = vec![];
        for k in 2..=4usize {
            row.push(state.contraction_number(k, m, m).unwrap());
        }
        println!("W m={m}: {row:?}");
    }
    let mut vconfig = MgConfig::default();
    vconfig.cycle = CycleKind::V;
    let vstate = setup(&h, &problem, vconfig).unwrap();
    for m in [40usize, 80] {
        println!("V m={m} k=3: {:?}", vstate.contraction_number(3, m, m).unwrap());
    }
    println!("reference W: m10 0.81, m20 0.67, m40 0.48, m80 0.24 (k-uniform)");
}
