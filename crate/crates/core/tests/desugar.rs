use hybrid_cplus::desugar::{expand_abbreviations, DesugarError, LawKind, Origin};
use hybrid_cplus::frontend::parse_description;
use hybrid_cplus::ir::{ActionDescription, Formula, GroundConst, Value};
use proptest::prelude::*;

const WATER: &str = include_str!("corpus/water.cp");
const CAR: &str = include_str!("corpus/car.cp");

fn desc(src: &str) -> ActionDescription {
    parse_description(src, "t.cp").unwrap().description
}

const HEADER: &str = ":- constants\nx1,x2 :: simpleFluent(real[0..30]);\nmode :: inertialFluent(real[1..2]);\n\
                      e1 :: exogenousAction;\nwait :: action.\n:- variables\nX.\n";

fn surface(laws: &str) -> Vec<String> {
    let b = expand_abbreviations(&desc(&format!("{HEADER}{laws}"))).unwrap();
    b.laws.iter().filter(|l| l.origin == Origin::Surface).map(|l| l.to_string()).collect()
}

#[test]
fn nonexecutable_becomes_fluent_dynamic_bottom() {
    assert_eq!(surface("nonexecutable e1 if -(x2<=r2)."), ["caused false after e1 & -(x2 <= r2)."]);
}

#[test]
fn inertial_mode_expands_per_value() {
    let b = expand_abbreviations(&desc(HEADER)).unwrap();
    let implicit: Vec<String> = b.laws.iter().filter(|l| l.origin == Origin::Implicit).map(|l| l.to_string()).collect();
    assert_eq!(
        implicit,
        [
            "caused {mode = 1}^ch after mode = 1.",
            "caused {mode = 2}^ch after mode = 2.",
            "caused {e1 = false}^ch.",
            "caused {e1}^ch.",
        ]
    );
    assert!(b.laws.iter().all(|l| l.choice));
    assert_eq!(b.laws[2].kind, LawKind::ActionDynamic);
}

#[test]
fn vacuous_constraint_is_dropped() {
    assert!(surface("constraint true.").is_empty());
}

#[test]
fn causes_splits_on_effect_kind() {
    assert_eq!(
        surface("e1 causes mode=2.\ne1 causes ~wait.\ndefault wait."),
        ["caused mode = 2 after e1.", "caused wait = false if e1.", "caused {wait}^ch."]
    );
}

#[test]
fn real_exogenous_is_one_schematic_default() {
    let b = expand_abbreviations(&desc(&format!("{HEADER}exogenous x1."))).unwrap();
    let s: Vec<String> = b.laws.iter().filter(|l| l.origin == Origin::Surface).map(|l| l.to_string()).collect();
    assert_eq!(s, ["caused {x1 = V_x1}^ch."]);
    assert_eq!(b.variable("V_x1").unwrap().sort.name, "real[0..30]");
}

#[test]
fn finite_exogenous_has_one_default_per_value() {
    let src = ":- sorts\ncolor.\n:- objects\nred, green, blue :: color.\n:- constants\nc :: simpleFluent(color).\nexogenous c.";
    let b = expand_abbreviations(&desc(src)).unwrap();
    assert_eq!(b.laws.len(), 3);
    assert!(b.laws.iter().all(|l| l.choice && l.kind == LawKind::Static));
}

#[test]
fn conjunctive_heads_are_split() {
    assert_eq!(
        surface("caused x1 = 1 & x2 = 2 if mode = 1."),
        ["caused x1 = 1 if mode = 1.", "caused x2 = 2 if mode = 1."]
    );
}

#[test]
fn car_tables_and_marker_laws() {
    let b = expand_abbreviations(&desc(CAR)).unwrap();
    assert_eq!(b.flow_table.len(), 3);
    assert!(b.flow_table.values().all(|r| r.len() == 3));
    assert_eq!(b.flow_table[&Value::int(2)][&GroundConst::plain("theta")].to_string(), "tan(0.226893)");
    assert_eq!(b.invariant_table[&Value::int(1)].len(), 3);
    assert_eq!(b.invariant_table[&Value::int(1)][0].to_string(), "(x - 9) * (x - 9) + y * y > 9");
    let flows: Vec<String> = b.laws.iter().filter(|l| l.origin == Origin::OdeFlow).map(|l| l.to_string()).collect();
    assert_eq!(flows.len(), 3);
    assert_eq!(
        flows[1],
        "caused false if -integral(2; [x, y, theta] <- [P_x, P_y, P_theta]; T) \
         after x = P_x & y = P_y & theta = P_theta & mode = 2 & duration = T & wait."
    );
    assert_eq!(b.laws.iter().filter(|l| l.origin == Origin::OdeInvariant).count(), 9);
    // x, y, theta and duration: one schematic default each; three boolean events: two each; mode: three.
    assert_eq!(b.laws.iter().filter(|l| l.origin == Origin::Implicit).count(), 4 + 6 + 3);
}

#[test]
fn zero_derivative_and_vacuous_invariant() {
    let b = expand_abbreviations(&desc(
        ":- constants\nx :: differentiableFluent(real[0..1]).\nderivative of x is 0 if mode=1.\nalways_t true if mode=1.",
    ))
    .unwrap();
    assert_eq!(b.invariant_table[&Value::int(1)], vec![Formula::True]);
    assert_eq!(b.laws.iter().filter(|l| l.origin == Origin::OdeInvariant).count(), 1);
}

#[test]
fn ode_errors() {
    let base = ":- constants\nx, y :: differentiableFluent(real[0..1]).\n";
    let cases = [
        ("derivative of x is 1 if mode=1.\nderivative of x is 2 if mode=1.\nderivative of y is 0 if mode=1.", "duplicate"),
        ("derivative of x is 1 if mode=1.", "incomplete"),
        ("always_t duration > 0 if mode=1.", "body"),
    ];
    for (laws, what) in cases {
        let e = expand_abbreviations(&desc(&format!("{base}{laws}"))).unwrap_err();
        match (what, &e) {
            ("duplicate", DesugarError::DuplicateRate { .. })
            | ("incomplete", DesugarError::IncompleteFlow { .. })
            | ("body", DesugarError::InvariantBody(_)) => {}
            _ => panic!("{what}: {e}"),
        }
    }
}

#[test]
fn parameterized_rates_expand_over_objects() {
    let src = ":- sorts\nball.\n:- objects\nb1,b2 :: ball.\n:- constants\n\
               height(ball), velocity(ball) :: differentiableFluent(real[-50..50]).\n\
               :- variables\nB :: ball;\nH.\n\
               derivative of height(B) is velocity(B) if mode=1.\n\
               derivative of velocity(B) is -g if mode=1.\n\
               always_t (height(B)=H ->> H>=0) if mode=1.";
    let b = expand_abbreviations(&desc(src)).unwrap();
    let row = &b.flow_table[&Value::int(1)];
    assert_eq!(row.len(), 4);
    assert_eq!(row[&GroundConst { name: "height".into(), args: vec![Value::Sym("b2".into())] }].to_string(), "velocity(b2)");
    assert_eq!(b.invariant_table[&Value::int(1)][0].to_string(), "height(b1) >= 0 & height(b2) >= 0");
}

#[test]
fn expansion_is_idempotent_on_the_corpus() {
    for src in [WATER, CAR] {
        let d = desc(src);
        let b = expand_abbreviations(&d).unwrap();
        assert_eq!(b.constants, d.constants);
        let again = expand_abbreviations(&b.into_description()).unwrap();
        assert_eq!(again, b);
    }
}

const MENU: &[&str] = &[
    "constraint x1 >= 0 ->> x2 >= 0.",
    "constraint x1 = X after x1 = X & e1.",
    "nonexecutable e1 if mode = 2.",
    "e1 causes mode = 2.",
    "e1 causes ~wait.",
    "default wait.",
    "exogenous x1.",
    "inertial x2 if mode = 1.",
    "caused x2 = 0 if x1 = 0.",
    "default x2 = 1 if mode = 2 after e1.",
    "constraint true.",
];

proptest! {
    #[test]
    fn expansion_is_idempotent(picks in proptest::collection::vec(0..MENU.len(), 0..8)) {
        let laws: String = picks.iter().map(|&i| format!("{}\n", MENU[i])).collect();
        let d = desc(&format!("{HEADER}{laws}"));
        let b = expand_abbreviations(&d).unwrap();
        prop_assert_eq!(&b.constants, &d.constants);
        prop_assert!(b.laws.iter().all(|l| l.kind == LawKind::FluentDynamic || l.after == Formula::True));
        let again = expand_abbreviations(&b.into_description()).unwrap();
        prop_assert_eq!(again, b);
    }
}
