use nsdarcy_web::demo::{inf_sup_sweep, mms_rates, solve_case};

#[test]
fn solved_fields_cover_every_vertex() {
    let v = solve_case("mixed", 2, 1.0, true).unwrap();
    let nv = v["vertices"].as_array().unwrap().len();
    assert_eq!(v["triangles"].as_array().unwrap().len(), 16);
    for field in ["velocity", "pressure", "head"] {
        assert_eq!(v["fields"][field].as_array().unwrap().len(), nv, "{field}");
    }
    assert!(v["report"]["bound_ok"].as_bool().unwrap());
}

#[test]
fn zero_amplitude_gives_zero_fields() {
    let v = solve_case("swirl", 2, 0.0, true).unwrap();
    let all_zero = |key: &str| v["fields"][key].as_array().unwrap().iter().all(|x| x.as_f64() == Some(0.0));
    assert!(all_zero("pressure") && all_zero("head"));
}

#[test]
fn equal_order_pair_collapses() {
    let rows = inf_sup_sweep(2, 2).unwrap();
    assert_eq!(rows.len(), 2);
    for r in rows {
        assert!(r.taylor_hood > 0.3, "{r:?}");
        assert!(r.equal_order < 1e-6, "{r:?}");
    }
}

#[test]
fn mms_table_has_rates_after_the_first_level() {
    let t = mms_rates(2, 2).unwrap();
    let rows = t["rows"].as_array().unwrap();
    assert!(rows[0]["rates"].is_null());
    let u_h1 = rows[1]["rates"][0].as_f64().unwrap();
    assert!(u_h1 > 0.5, "{u_h1}");
}
