mod common;

#[test]
fn heuristic_matches_exhaustive_on_small_neighborhoods() {
    let st = common::search_oracle(200);
    assert!(st.overshoots.is_empty(), "heuristic beat the optimum: {:?}", st.overshoots);
    assert!(st.ab_violations.is_empty(), "{:?}", st.ab_violations);
    assert!(st.hits * 10 >= st.runs * 9, "only {}/{} runs reached the optimum", st.hits, st.runs);
}
