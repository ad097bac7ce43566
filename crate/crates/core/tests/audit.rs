use scet_core::arch::{checkpoint, Conv, LayerCost, ParamRegistry, Resolution, ScetConfig, ScetModel};
use scet_core::audit::{count_macs, count_multiadds, count_params, layer_macs, report, AuditError, ReportFormat};

fn within(got: f64, target: f64, rel: f64) -> bool {
    (got / target - 1.0).abs() <= rel
}

fn model(d: usize, w: usize) -> ScetModel<f32> {
    ScetModel::new(ScetConfig::new(d, w, 4)).unwrap()
}

#[test]
fn parameter_table_rows() {
    for (d, w, target) in [(16, 64, 683e3), (8, 32, 98e3), (16, 32, 172e3), (8, 64, 388e3)] {
        let p = count_params(&model(d, w)) as f64;
        assert!(within(p, target, 0.05), "d={d} w={w}: {p}");
    }
    let base = ScetModel::<f32>::new(ScetConfig::default().without_transformer()).unwrap();
    assert!(within(count_params(&base) as f64, 629e3, 0.05));
}

#[test]
fn multiadds_table_rows() {
    let full = count_multiadds(&model(16, 64), 1280, 720).unwrap() as f64;
    assert!(within(full, 78.72e9, 0.05), "{full}");
    let small = count_multiadds(&model(8, 32), 1280, 720).unwrap() as f64;
    assert!(within(small, 11.46e9, 0.05), "{small}");
    let base = ScetModel::<f32>::new(ScetConfig::default().without_transformer()).unwrap();
    let b = count_multiadds(&base, 1280, 720).unwrap() as f64;
    assert!(within(b, 72.59e9, 0.05), "{b}");
}

#[test]
fn lone_layer_closed_forms() {
    let mut reg = ParamRegistry::<f32>::new();
    let conv = Conv::new(&mut reg, "c", 3, 64, 3, 1).unwrap();
    assert_eq!(reg.numel(), 3 * 64 * 9 + 64);
    assert_eq!(reg.numel(), 1_792);
    let _ = conv;

    let pointwise = LayerCost::Conv { cin: 64, cout: 64, kernel: 1, groups: 1, at: Resolution::Low };
    assert_eq!(layer_macs(&pointwise, 320 * 180, 1280 * 720), 235_929_600);
    let depthwise = LayerCost::Conv { cin: 32, cout: 32, kernel: 3, groups: 32, at: Resolution::Low };
    assert_eq!(layer_macs(&depthwise, 100, 400), 32 * 9 * 100);
    let hr = LayerCost::Conv { cin: 4, cout: 3, kernel: 3, groups: 1, at: Resolution::High };
    assert_eq!(layer_macs(&hr, 100, 400), 4 * 3 * 9 * 400);
}

#[test]
fn attention_scales_with_pixels_and_head_width() {
    let at = |channels, heads, px| layer_macs(&LayerCost::ChannelAttention { channels, heads }, px, 0);
    assert_eq!(at(64, 1, 200), 2 * at(64, 1, 100));
    assert_eq!(at(64, 1, 100), 4 * at(32, 1, 100));
    assert_eq!(at(64, 2, 100) * 2, at(64, 1, 100));
    assert_eq!(at(64, 1, 100), 2 * 64 * 64 * 100);

    let m = model(2, 16);
    let mdta = |w, h| {
        report(&m, w, h).unwrap().rows.iter().find(|r| r.name == "mdta").unwrap().macs
    };
    assert_eq!(mdta(256, 128), 2 * mdta(128, 128));
}

#[test]
fn params_strictly_monotone() {
    let mut prev = 0;
    for d in 1..6 {
        let p = count_params(&model(d, 32));
        assert!(p > prev);
        prev = p;
    }
    let mut prev = 0;
    for w in [16, 32, 48, 64] {
        let p = count_params(&model(4, w));
        assert!(p > prev);
        prev = p;
    }
}

#[test]
fn multiadds_is_twice_macs_and_rejects_indivisible() {
    let m = model(2, 16);
    assert_eq!(count_multiadds(&m, 64, 64).unwrap(), 2 * count_macs(&m, 64, 64).unwrap());
    assert_eq!(count_multiadds(&m, 1282, 720), Err(AuditError::NotDivisible { width: 1282, height: 720, scale: 4 }));
}

#[test]
fn report_rendering_contract() {
    let m = model(16, 64);
    let r = report(&m, 1280, 720).unwrap();
    assert_eq!(r.total_params(), count_params(&m));
    assert_eq!(r.total_multiadds(), count_multiadds(&m, 1280, 720).unwrap());

    let csv = r.render(ReportFormat::Csv);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "name,params,multiadds");
    assert_eq!(lines.len() - 1, m.cost_layout().len() + 1);
    assert_eq!(*lines.last().unwrap(), format!("total,{},{}", r.total_params(), r.total_multiadds()));
    assert_eq!(csv, report(&m, 1280, 720).unwrap().render_csv());

    let text = r.render(ReportFormat::Text);
    let total = text.lines().find(|l| l.starts_with("total")).unwrap();
    assert!(total.contains(&count_params(&m).to_string()));
    assert_eq!(text, r.render_text());
}

#[test]
fn params_match_checkpoint_byte_count() {
    let m = ScetModel::<f32>::new(ScetConfig::new(3, 16, 2)).unwrap();
    let bytes = checkpoint::encode(&m);
    let header = 8 + 4 + 16 + 8 + 4;
    let meta: usize = m.registry().iter().map(|(n, p)| 2 + n.len() + 1 + 4 * p.value.rank()).sum();
    assert_eq!(((bytes.len() - header - meta) / 4) as u64, count_params(&m));
}
