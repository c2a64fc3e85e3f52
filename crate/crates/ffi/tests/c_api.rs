use std::ffi::{c_char, CStr, CString};
use std::ptr;

use polyrank_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

unsafe fn take(s: *mut c_char) -> String {
    let out = CStr::from_ptr(s).to_str().unwrap().to_string();
    pr_string_free(s);
    out
}

fn last_error() -> String {
    let p = pr_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_string()
}

const MATMUL: &str = "param M = 4\nparam N = 4\nparam K = 4\n\
    loop i lower 0 upper M\nloop j lower 0 upper N\nloop k lower 0 upper K\n\
    statement S\n read C[i][j]\n read A[i][k]\n read B[k][j]\n write C[i][j]\nend\n";

#[test]
fn analyze_matmul_through_handles() {
    unsafe {
        let mut nest = ptr::null_mut();
        assert_eq!(pr_nest_parse(c(MATMUL).as_ptr(), &mut nest), PrStatus::Ok);
        let mut m = ptr::null_mut();
        assert_eq!(pr_machine_default(&mut m), PrStatus::Ok);
        let mut a = ptr::null_mut();
        assert_eq!(pr_analyze(nest, m, &mut a), PrStatus::Ok);
        let mut n = 0usize;
        assert_eq!(pr_analysis_dependence_count(a, &mut n), PrStatus::Ok);
        assert_eq!(n, 6);
        let (mut lo, mut hi) = (0u64, 0u64);
        assert_eq!(pr_analysis_working_set(a, 2, &mut lo, &mut hi), PrStatus::Ok);
        assert_eq!((lo, hi), (11, 21));
        let mut s = ptr::null_mut();
        assert_eq!(pr_analysis_dependence_label(a, 2, &mut s), PrStatus::Ok);
        assert!(take(s).contains("A[i][k]"));
        assert_eq!(pr_analysis_working_set(a, 6, &mut lo, &mut hi), PrStatus::OutOfRange);
        assert!(last_error().contains("out of range"));
        assert_eq!(pr_analysis_report(a, &mut s), PrStatus::Ok);
        assert!(take(s).starts_with("variant identity\n"));
        assert_eq!(pr_analysis_cost(a, &mut s), PrStatus::Ok);
        assert!(!take(s).is_empty());
        pr_analysis_free(a);
        pr_machine_free(m);
        pr_nest_free(nest);
    }
}

#[test]
fn rank_and_emit() {
    unsafe {
        let mut nest = ptr::null_mut();
        assert_eq!(pr_nest_parse(c(MATMUL).as_ptr(), &mut nest), PrStatus::Ok);
        let mut m = ptr::null_mut();
        assert_eq!(pr_machine_default(&mut m), PrStatus::Ok);
        let mut r = ptr::null_mut();
        assert_eq!(pr_rank(nest, m, c("permute i j k\n").as_ptr(), &mut r), PrStatus::Ok);
        let mut n = 0usize;
        assert_eq!(pr_ranking_count(r, &mut n), PrStatus::Ok);
        assert_eq!(n, 6);
        let mut s = ptr::null_mut();
        assert_eq!(pr_ranking_id(r, 0, &mut s), PrStatus::Ok);
        let best = take(s);
        assert!(best.starts_with("perm="));
        assert_eq!(pr_ranking_source(r, 0, &mut s), PrStatus::Ok);
        assert!(take(s).contains("for ("));
        let mut costs = Vec::new();
        for i in 0..n {
            assert_eq!(pr_ranking_cost(r, i, &mut s), PrStatus::Ok);
            costs.push(take(s).parse::<f64>().unwrap());
        }
        assert!(costs.windows(2).all(|w| w[0] <= w[1]), "{costs:?}");
        assert_eq!(pr_ranking_id(r, n, &mut s), PrStatus::OutOfRange);
        pr_ranking_free(r);

        assert_eq!(pr_nest_emit(nest, c("perm=k,j,i").as_ptr(), &mut s), PrStatus::Ok);
        let src = take(s);
        assert!(src.find("for (k").unwrap() < src.find("for (i").unwrap());
        pr_machine_free(m);
        pr_nest_free(nest);
    }
}

#[test]
fn error_codes() {
    unsafe {
        let mut nest = ptr::null_mut();
        assert_eq!(pr_nest_parse(c("loop i lower 0\n").as_ptr(), &mut nest), PrStatus::ParseError);
        assert!(nest.is_null());
        assert!(!last_error().is_empty());
        assert_eq!(pr_nest_preset(c("conv:1,2").as_ptr(), &mut nest), PrStatus::ParseError);
        let mut m = ptr::null_mut();
        assert_eq!(pr_machine_parse(c("level L1 size -3\n").as_ptr(), &mut m), PrStatus::ParseError);
        assert_eq!(pr_nest_preset(c("conv").as_ptr(), &mut nest), PrStatus::Ok);
        let mut s = ptr::null_mut();
        assert_eq!(pr_nest_emit(nest, c("perm=oi,img").as_ptr(), &mut s), PrStatus::ConfigRejected);
        assert!(s.is_null());
        assert_eq!(pr_nest_emit(nest, ptr::null(), &mut s), PrStatus::NullPointer);
        assert_eq!(pr_analyze(nest, ptr::null(), ptr::null_mut()), PrStatus::NullPointer);
        pr_nest_free(nest);
        pr_nest_free(ptr::null_mut());
        pr_string_free(ptr::null_mut());
    }
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/polyrank.h")).unwrap();
    for name in ["typedef struct PrNest PrNest", "PR_STATUS_CONFIG_REJECTED", "pr_analyze(", "pr_rank(", "pr_last_error(", "pr_string_free("] {
        assert!(h.contains(name), "header lacks {name}");
    }
}
