use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use dpg_ffi::*;

fn grid(n: usize) -> Vec<f32> {
    (0..n).flat_map(|i| [(i % 20) as f32, (i / 20) as f32, ((i * 7) % 5) as f32]).collect()
}

fn last_error() -> String {
    let p = dpg_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn new_dataset(data: &[f32], d: usize) -> *mut DpgDataset {
    let mut ds = ptr::null_mut();
    let st = unsafe { dpg_dataset_new(data.as_ptr(), data.len() / d, d, &mut ds) };
    assert_eq!(st, DpgStatus::Ok);
    ds
}

#[test]
fn build_search_save_load() {
    let data = grid(400);
    let ds = new_dataset(&data, 3);
    unsafe {
        assert_eq!(dpg_dataset_len(ds), 400);
        assert_eq!(dpg_dataset_dim(ds), 3);
        for method in [DPG_METHOD_COUNTING, DPG_METHOD_ANGULAR] {
            let mut idx = ptr::null_mut();
            assert_eq!(dpg_index_build(ds, 6, method, 42, &mut idx), DpgStatus::Ok);
            assert_eq!(dpg_index_len(idx), 400);
            assert!(dpg_index_edge_count(idx) <= 2 * 6 * 400);

            let q = &data[3 * 37..3 * 38];
            let (mut ids, mut dists) = ([0u32; 5], [0f32; 5]);
            let mut stats = DpgSearchStats::default();
            let st = dpg_search(ds, idx, q.as_ptr(), 3, 5, 20, 4, 1, ids.as_mut_ptr(), dists.as_mut_ptr(), &mut stats);
            assert_eq!(st, DpgStatus::Ok, "{}", last_error());
            assert_eq!(ids[0], 37);
            assert_eq!(dists[0], 0.0);
            assert!(dists.windows(2).all(|w| w[0] <= w[1]));
            assert!(stats.distance_computations >= 5 && stats.distance_computations <= 400);
            assert!(stats.hops >= 1);

            let dir = tempfile::tempdir().unwrap();
            let path = CString::new(dir.path().join("g.dpgi").to_str().unwrap()).unwrap();
            assert_eq!(dpg_index_save(idx, path.as_ptr()), DpgStatus::Ok);
            let mut loaded = ptr::null_mut();
            assert_eq!(dpg_index_load(path.as_ptr(), &mut loaded), DpgStatus::Ok);
            assert_eq!(dpg_index_edge_count(loaded), dpg_index_edge_count(idx));
            let (mut ids2, mut dists2) = ([0u32; 5], [0f32; 5]);
            let st = dpg_search(ds, loaded, q.as_ptr(), 3, 5, 20, 4, 1, ids2.as_mut_ptr(), dists2.as_mut_ptr(), ptr::null_mut());
            assert_eq!(st, DpgStatus::Ok);
            assert_eq!((ids, dists), (ids2, dists2));
            dpg_index_free(loaded);
            dpg_index_free(idx);
        }
        let mut kg = ptr::null_mut();
        assert_eq!(dpg_index_build_kgraph(ds, 10, 42, &mut kg), DpgStatus::Ok);
        assert_eq!(dpg_index_edge_count(kg), 4000);
        dpg_index_free(kg);
        dpg_dataset_free(ds);
    }
}

#[test]
fn errors_map_to_status_codes() {
    unsafe {
        let mut ds = ptr::null_mut();
        assert_eq!(dpg_dataset_new(ptr::null(), 1, 1, &mut ds), DpgStatus::NullPointer);
        assert!(last_error().contains("data"));

        let bad = [f32::NAN, 1.0];
        assert_eq!(dpg_dataset_new(bad.as_ptr(), 1, 2, &mut ds), DpgStatus::Usage);

        let missing = CString::new("/nonexistent/file.fvecs").unwrap();
        assert_eq!(dpg_dataset_read_fvecs(missing.as_ptr(), &mut ds), DpgStatus::Io);

        let dir = tempfile::tempdir().unwrap();
        let junk = dir.path().join("junk.dpgi");
        std::fs::write(&junk, b"DPGIxx").unwrap();
        let junk = CString::new(junk.to_str().unwrap()).unwrap();
        let mut idx = ptr::null_mut();
        assert_eq!(dpg_index_load(junk.as_ptr(), &mut idx), DpgStatus::Format);
        assert!(idx.is_null());

        let data = grid(50);
        let ds = new_dataset(&data, 3);
        assert_eq!(dpg_index_build(ds, 4, 9, 1, &mut idx), DpgStatus::Usage);
        assert_eq!(dpg_index_build(ds, 0, DPG_METHOD_COUNTING, 1, &mut idx), DpgStatus::Usage);
        assert_eq!(dpg_index_build(ds, 4, DPG_METHOD_COUNTING, 1, ptr::null_mut()), DpgStatus::NullPointer);
        assert_eq!(dpg_index_build(ds, 4, DPG_METHOD_COUNTING, 1, &mut idx), DpgStatus::Ok);

        let q = [0f32; 3];
        let (mut ids, mut dists) = ([0u32; 8], [0f32; 8]);
        // pool smaller than k
        let st = dpg_search(ds, idx, q.as_ptr(), 3, 8, 4, 1, 0, ids.as_mut_ptr(), dists.as_mut_ptr(), ptr::null_mut());
        assert_eq!(st, DpgStatus::Usage);
        // wrong query dimension
        let st = dpg_search(ds, idx, q.as_ptr(), 2, 8, 8, 1, 0, ids.as_mut_ptr(), dists.as_mut_ptr(), ptr::null_mut());
        assert_eq!(st, DpgStatus::Usage);
        assert!(last_error().contains("dimension"));

        // index over a different dataset
        let other = new_dataset(&grid(60), 3);
        let st = dpg_search(other, idx, q.as_ptr(), 3, 8, 8, 1, 0, ids.as_mut_ptr(), dists.as_mut_ptr(), ptr::null_mut());
        assert_eq!(st, DpgStatus::Usage);

        assert_eq!(dpg_dataset_len(ptr::null()), 0);
        dpg_index_free(ptr::null_mut());
        dpg_dataset_free(ptr::null_mut());
        dpg_index_free(idx);
        dpg_dataset_free(ds);
        dpg_dataset_free(other);
    }
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include/dpg.h")
}

#[test]
fn header_declares_the_api() {
    let text = std::fs::read_to_string(header()).unwrap();
    for name in [
        "dpg_last_error_message", "dpg_dataset_new", "dpg_dataset_read_fvecs", "dpg_dataset_free",
        "dpg_index_build", "dpg_index_build_kgraph", "dpg_index_save", "dpg_index_load",
        "dpg_index_free", "dpg_search", "DPG_STATUS_FORMAT = 3", "typedef struct DpgIndex DpgIndex",
    ] {
        assert!(text.contains(name), "{name} missing from header");
    }
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include "dpg.h"

int main(void) {
    float data[300 * 2];
    for (int i = 0; i < 300; i++) { data[2 * i] = (float)(i % 15); data[2 * i + 1] = (float)(i / 15); }
    DpgDataset *ds = NULL;
    DpgIndex *idx = NULL;
    if (dpg_dataset_new(data, 300, 2, &ds) != DPG_STATUS_OK) return 10;
    if (dpg_index_build(ds, 5, DPG_METHOD_COUNTING, 42, &idx) != DPG_STATUS_OK) return 11;
    uint32_t ids[4];
    float dists[4];
    DpgSearchStats stats;
    if (dpg_search(ds, idx, &data[2 * 123], 2, 4, 16, 3, 7, ids, dists, &stats) != DPG_STATUS_OK) return 12;
    if (ids[0] != 123 || dists[0] != 0.0f) return 13;
    if (dpg_index_load("/nonexistent.dpgi", &idx) != DPG_STATUS_IO) return 14;
    if (dpg_last_error_message() == NULL) return 15;
    dpg_index_free(idx);
    dpg_dataset_free(ds);
    printf("ok %llu\n", (unsigned long long)stats.distance_computations);
    return 0;
}
"#;

#[test]
fn c_program_links_against_the_shared_library() {
    // test binaries live in target/<profile>/deps, the cdylib one level up
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().unwrap().parent().unwrap().to_path_buf();
    let lib = lib_dir.join(format!("{}dpg_ffi{}", std::env::consts::DLL_PREFIX, std::env::consts::DLL_SUFFIX));
    assert!(lib.exists(), "{} not built", lib.display());

    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg("-o")
        .arg(&bin)
        .arg(format!("-L{}", lib_dir.display()))
        .arg("-ldpg_ffi")
        .arg(format!("-Wl,-rpath,{}", lib_dir.display()))
        .status()
        .expect("cc not available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
