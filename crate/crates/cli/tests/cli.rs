use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mos_core::hierpr::{FeatureMap, MlpWeights};
use mos_core::mask::{load_mask, save_image, save_mask, save_scoremap, BinaryMask, RgbImage, ScoreMap};
use mos_core::shapes::centered_disk;
use tempfile::TempDir;

fn mos(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mos"))
        .args(args)
        .output()
        .expect("run mos")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn dataset(root: &Path) -> (std::path::PathBuf, std::path::PathBuf) {
    let (pred, gt) = (root.join("pred"), root.join("gt"));
    fs::create_dir_all(&pred).unwrap();
    fs::create_dir_all(&gt).unwrap();
    let a = centered_disk(48, 15.0).unwrap();
    let b = BinaryMask::from_fn(48, 40, |x, y| x > 10 && y < 30).unwrap();
    save_mask(&a, gt.join("a.png")).unwrap();
    save_mask(&b, gt.join("b.pgm")).unwrap();
    save_mask(&a, pred.join("a.png")).unwrap();
    save_scoremap(
        &ScoreMap::from_fn(48, 40, |x, _| if x > 12 { 0.9 } else { 0.2 }).unwrap(),
        pred.join("b.png"),
    )
    .unwrap();
    (pred, gt)
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&mos(&["--help"])), 0);
    assert_eq!(code(&mos(&[])), 1);
    assert_eq!(code(&mos(&["eval", "--pred", "x"])), 1);
    assert_eq!(code(&mos(&["frobnicate"])), 1);
}

#[test]
fn eval_writes_reports() {
    let t = TempDir::new().unwrap();
    let (pred, gt) = dataset(t.path());
    let (csv, json) = (t.path().join("r.csv"), t.path().join("r.json"));
    let o = mos(&[
        "eval",
        "--pred",
        p(&pred),
        "--gt",
        p(&gt),
        "--csv",
        p(&csv),
        "--json",
        p(&json),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "stem,mae,sm,iou,mba,mq");
    assert!(lines[1].starts_with("a,0.000000,1.000000,1.000000,1.000000,1.000000"));
    assert!(lines[2].starts_with("b,"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert!(v["aggregate"]["mq"].as_f64().unwrap() < 1.0);
    assert_eq!(v["skipped"].as_array().unwrap().len(), 0);

    let bad_bands = mos(&[
        "eval",
        "--pred",
        p(&pred),
        "--gt",
        p(&gt),
        "--csv",
        p(&csv),
        "--json",
        p(&json),
        "--bands",
        "1",
    ]);
    assert_eq!(code(&bad_bands), 1);
}

#[test]
fn eval_empty_pairing_is_data_error() {
    let t = TempDir::new().unwrap();
    let (pred, gt) = dataset(t.path());
    fs::rename(pred.join("a.png"), pred.join("z.png")).unwrap();
    fs::rename(pred.join("b.png"), pred.join("y.png")).unwrap();
    let o = mos(&[
        "eval",
        "--pred",
        p(&pred),
        "--gt",
        p(&gt),
        "--csv",
        "/dev/null",
        "--json",
        "/dev/null",
    ]);
    assert_eq!(code(&o), 2);
    let missing = mos(&[
        "eval",
        "--pred",
        "/nonexistent/x",
        "--gt",
        p(&gt),
        "--csv",
        "/dev/null",
        "--json",
        "/dev/null",
    ]);
    assert_eq!(code(&missing), 2);
}

#[test]
fn eval_unwritable_report_is_internal() {
    let t = TempDir::new().unwrap();
    let (pred, gt) = dataset(t.path());
    let bad = t.path().join("no/such/dir/r.csv");
    let o = mos(&[
        "eval",
        "--pred",
        p(&pred),
        "--gt",
        p(&gt),
        "--csv",
        p(&bad),
        "--json",
        p(&t.path().join("r.json")),
    ]);
    assert_eq!(code(&o), 3);
}

#[test]
fn complexity_json() {
    let t = TempDir::new().unwrap();
    let (_, gt) = dataset(t.path());
    fs::write(gt.join("notes.txt"), "not an image").unwrap();
    let json = t.path().join("c.json");
    let o = mos(&["complexity", "--gt", p(&gt), "--json", p(&json)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["count"], 2);
    assert_eq!(v["skipped"].as_array().unwrap().len(), 1);
    assert!(v["mean_c_ipq"].as_f64().unwrap() > 0.5);
}

#[test]
fn perturb_writes_mask_and_sidecar() {
    let t = TempDir::new().unwrap();
    let gt = t.path().join("gt.png");
    save_mask(&centered_disk(96, 35.0).unwrap(), &gt).unwrap();
    let out = t.path().join("out.png");
    let o = mos(&[
        "perturb",
        "--gt",
        p(&gt),
        "--out",
        p(&out),
        "--kind",
        "iou-target",
        "--iou-min",
        "0.8",
        "--iou-max",
        "0.9",
        "--seed",
        "4",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(t.path().join("out.json")).unwrap()).unwrap();
    let achieved = v["achieved_iou"].as_f64().unwrap();
    assert!((0.8..=0.9).contains(&achieved), "{achieved}");
    assert_eq!(load_mask(&out).unwrap().dims(), (96, 96));
    let first = fs::read(&out).unwrap();
    assert_eq!(
        code(&mos(&[
            "perturb",
            "--gt",
            p(&gt),
            "--out",
            p(&out),
            "--kind",
            "iou-target",
            "--iou-min",
            "0.8",
            "--iou-max",
            "0.9",
            "--seed",
            "4"
        ])),
        0
    );
    assert_eq!(fs::read(&out).unwrap(), first);

    let bad = mos(&[
        "perturb",
        "--gt",
        p(&gt),
        "--out",
        p(&out),
        "--kind",
        "iou-target",
        "--iou-min",
        "0.9",
        "--iou-max",
        "0.8",
    ]);
    assert_eq!(code(&bad), 1);
    let gone = mos(&[
        "perturb",
        "--gt",
        p(&gt),
        "--out",
        p(&out),
        "--kind",
        "erode",
        "--radius",
        "80",
    ]);
    assert_eq!(code(&gone), 2);
}

#[test]
fn hierpr_refine_doubles_resolution() {
    let t = TempDir::new().unwrap();
    let coarse = t.path().join("coarse.png");
    save_scoremap(
        &ScoreMap::from_fn(20, 12, |x, y| ((x + y) % 7) as f64 / 6.0).unwrap(),
        &coarse,
    )
    .unwrap();
    let feats = t.path().join("f.txt");
    FeatureMap::new(2, 5, 4, (0..40).map(|i| i as f64 / 40.0).collect())
        .unwrap()
        .save(&feats)
        .unwrap();
    let weights = t.path().join("w.txt");
    MlpWeights::<f64>::random(2, 4, 4, 1.0, 1).save(&weights).unwrap();
    let out = t.path().join("out.png");
    let o = mos(&[
        "hierpr-refine",
        "--coarse",
        p(&coarse),
        "--features",
        p(&feats),
        "--weights",
        p(&weights),
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(image::open(&out).unwrap().width(), 40);

    let wrong = t.path().join("w3.txt");
    MlpWeights::<f64>::random(3, 4, 4, 1.0, 1).save(&wrong).unwrap();
    let o = mos(&[
        "hierpr-refine",
        "--coarse",
        p(&coarse),
        "--features",
        p(&feats),
        "--weights",
        p(&wrong),
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 2);
    fs::write(&wrong, "HIERPR-MLP v1\n1 1\n").unwrap();
    let o = mos(&[
        "hierpr-refine",
        "--coarse",
        p(&coarse),
        "--features",
        p(&feats),
        "--weights",
        p(&wrong),
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn schedule_validate_codes() {
    let t = TempDir::new().unwrap();
    let emitted = t.path().join("s.json");
    let o = mos(&["schedule-validate", "--emit", p(&emitted)]);
    assert_eq!(code(&o), 0);
    assert_eq!(code(&mos(&["schedule-validate", "--schedule", p(&emitted)])), 0);

    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&emitted).unwrap()).unwrap();
    v["blocks"].as_array_mut().unwrap().pop();
    fs::write(&emitted, v.to_string()).unwrap();
    let o = mos(&["schedule-validate", "--schedule", p(&emitted)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stdout).contains("block count"));

    fs::write(&emitted, "{ not json").unwrap();
    assert_eq!(code(&mos(&["schedule-validate", "--schedule", p(&emitted)])), 2);
}

#[test]
fn pipeline_and_composite() {
    let t = TempDir::new().unwrap();
    let img = RgbImage::from_fn(300, 250, |x, y| image::Rgb([(x % 256) as u8, (y % 256) as u8, 40]));
    let img_path = t.path().join("img.png");
    save_image(&img, &img_path).unwrap();
    let coarse = t.path().join("coarse.png");
    save_mask(&centered_disk(64, 20.0).unwrap(), &coarse).unwrap();
    let (mask, comp) = (t.path().join("m.png"), t.path().join("c.png"));
    let o = mos(&[
        "pipeline-run",
        "--image",
        p(&img_path),
        "--coarse",
        p(&coarse),
        "--out-mask",
        p(&mask),
        "--out-composite",
        p(&comp),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m = load_mask(&mask).unwrap();
    assert_eq!(m.dims(), (300, 250));
    assert!(m.get(150, 125) && !m.get(0, 0));
    let c = image::open(&comp).unwrap().to_rgb8();
    assert_eq!(c.get_pixel(0, 0).0, [0, 255, 0]);
    assert_eq!(c.get_pixel(150, 125), img.get_pixel(150, 125));

    let o = mos(&[
        "pipeline-run",
        "--image",
        p(&img_path),
        "--coarse",
        p(&coarse),
        "--refiner",
        "hierpr",
        "--out-mask",
        p(&mask),
    ]);
    assert_eq!(code(&o), 1);
    let w = t.path().join("w.txt");
    MlpWeights::<f64>::random(3, 4, 4, 0.5, 2).save(&w).unwrap();
    let o = mos(&[
        "pipeline-run",
        "--image",
        p(&img_path),
        "--coarse",
        p(&coarse),
        "--refiner",
        "hierpr",
        "--weights",
        p(&w),
        "--out-mask",
        p(&mask),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = mos(&[
        "pipeline-run",
        "--image",
        p(&img_path),
        "--coarse",
        p(&coarse),
        "--stride",
        "500",
        "--out-mask",
        p(&mask),
    ]);
    assert_eq!(code(&o), 1);

    let out = t.path().join("green.png");
    assert_eq!(
        code(&mos(&[
            "composite",
            "--image",
            p(&img_path),
            "--mask",
            p(&mask),
            "--out",
            p(&out)
        ])),
        0
    );
    let small = t.path().join("small.png");
    save_mask(&centered_disk(10, 3.0).unwrap(), &small).unwrap();
    assert_eq!(
        code(&mos(&[
            "composite",
            "--image",
            p(&img_path),
            "--mask",
            p(&small),
            "--out",
            p(&out)
        ])),
        2
    );
}
