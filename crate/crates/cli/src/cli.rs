use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use orgb_core::color::{convert, display_channel, ColorSpace};
use orgb_core::demos::{
    best_label_metrics, canny_edges, kmeans_segment, segmentation_metrics, CannyParams, LabelImage, SegMetrics,
};
use orgb_core::image::io::load_index_png;
use orgb_core::image::{
    histogram_equalize, invert, load_image, save_channel, save_float, save_image, save_labels, BitDepth,
    DEFAULT_HISTEQ_BINS,
};
use orgb_core::offset::{estimate_epsilon_with, subtract_ambient, Method};
use orgb_core::spectral::{
    color_line_image, colorchecker_document, render, ChartLayout, ChartLighting, MuPattern, PatchResponse,
    PixelNoise, RoadScene, SceneDocument, COLORCHECKER,
};
use orgb_core::{correct, make_mask_rect, Epsilon, LinearImage, Offset, Rect, RegionMask};

use crate::report::{diagnose, NamedRegion, RegionsFile};
use crate::service;
use crate::store::DEFAULT_MAX_IMAGES;

/// Offset-corrected RGB: estimate and remove the environment-light offset
/// of color lines.
#[derive(Debug, Parser)]
#[command(name = "orgb", version)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic scene to images and sidecars.
    Simulate(SimulateArgs),
    /// Estimate the offset from a rectangular region of one material.
    Estimate(EstimateArgs),
    /// Remove an estimated offset from an image.
    Correct(CorrectArgs),
    /// Convert to rg chromaticity, HSV or CIELUV channel images.
    Convert(ConvertArgs),
    /// Fit color lines to regions and report where they meet.
    Diagnose(DiagnoseArgs),
    /// Downstream demos: segmentation, edges, scores.
    #[command(subcommand)]
    Demo(DemoCommand),
    /// Run the HTTP/JSON service.
    Serve(ServeArgs),
}

fn parse_triple(s: &str) -> Result<[f64; 3], String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated numbers, got {s:?}"));
    }
    let mut out = [0.0; 3];
    for (o, p) in out.iter_mut().zip(&parts) {
        *o = p.parse().map_err(|_| format!("{p:?} is not a number"))?;
    }
    Ok(out)
}

fn parse_depth(s: &str) -> Result<BitDepth, String> {
    let bits: u8 = s.parse().map_err(|_| format!("{s:?} is not a bit depth"))?;
    BitDepth::try_from(bits).map_err(|e| e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// 24-patch chart, 4 rows by 6 columns.
    Chart,
    /// Dark road band between light verges, shadowed at the top.
    Road,
    /// Single synthetic color line `s·direction + offset`.
    Line,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Occlusion {
    None,
    Full,
    /// Visibility ramps from 0 at the left edge to 1 at the right.
    Ramp,
}

impl Occlusion {
    fn pattern(self) -> MuPattern {
        match self {
            Occlusion::None => MuPattern::None,
            Occlusion::Full => MuPattern::Full,
            Occlusion::Ramp => MuPattern::ramp(),
        }
    }
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Scene document (JSON).
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    scene: Option<PathBuf>,
    #[arg(long, value_enum)]
    preset: Option<Preset>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    width: Option<usize>,
    #[arg(long)]
    height: Option<usize>,
    /// Environment-light strength (chart default 0.2, road default 0.3).
    #[arg(long)]
    ambient: Option<f64>,
    /// Chart visibility layout.
    #[arg(long, value_enum, default_value = "ramp")]
    occlusion: Occlusion,
    /// Line preset direction.
    #[arg(long, value_parser = parse_triple, default_value = "0.6,0.3,0.1")]
    direction: [f64; 3],
    /// Line preset offset added to every pixel.
    #[arg(long, value_parser = parse_triple, default_value = "0.05,0.08,0.12")]
    offset: [f64; 3],
    /// Standard deviation of additive Gaussian pixel noise.
    #[arg(long, default_value_t = 0.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_parser = parse_depth, default_value = "16")]
    depth: BitDepth,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    image: PathBuf,
    /// Region as x,y,w,h.
    #[arg(long)]
    rect: Rect,
    #[arg(long, default_value = "ols")]
    method: Method,
    /// Epsilon sidecar path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CorrectArgs {
    #[arg(long)]
    image: PathBuf,
    /// Epsilon sidecar written by `estimate`.
    #[arg(long, conflicts_with = "epsilon", required_unless_present = "epsilon")]
    eps: Option<PathBuf>,
    /// Offset given directly as e1,e2,e3.
    #[arg(long, value_parser = parse_triple, allow_hyphen_values = true)]
    epsilon: Option<[f64; 3]>,
    /// Output image; `.f64` keeps full precision, `.ppm` writes P6, else PNG.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = parse_depth, default_value = "16")]
    depth: BitDepth,
}

#[derive(Debug, Args)]
struct ConvertArgs {
    #[arg(long)]
    image: PathBuf,
    /// rg, hsv or luv.
    #[arg(long)]
    space: ColorSpace,
    /// Single channel to write (e.g. s); all channels when omitted.
    #[arg(long)]
    channel: Option<String>,
    /// Histogram-equalize each written channel.
    #[arg(long)]
    histeq: bool,
    /// Write 1 - value.
    #[arg(long)]
    invert: bool,
    /// Output file for a single `--channel`; `.f64` writes unscaled values.
    #[arg(long, requires = "channel", conflicts_with = "out_dir", required_unless_present = "out_dir")]
    out: Option<PathBuf>,
    /// Directory receiving `<space>_<channel>.png` per channel.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long, value_parser = parse_depth, default_value = "16")]
    depth: BitDepth,
}

#[derive(Debug, Args)]
struct DiagnoseArgs {
    #[arg(long)]
    image: PathBuf,
    /// Regions file: {"regions": [{"name": .., "rect": {..}}]}.
    #[arg(long, required_unless_present = "rect")]
    regions: Option<PathBuf>,
    /// Extra region as x,y,w,h; repeatable.
    #[arg(long)]
    rect: Vec<Rect>,
    /// Ambient-only image to subtract before fitting.
    #[arg(long)]
    ambient: Option<PathBuf>,
    /// Report path; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum DemoCommand {
    /// k-means on hue-saturation; writes a label PNG.
    Segment(SegmentArgs),
    /// Canny edges of the saturation channel.
    Edges(EdgesArgs),
    /// Score a label image against ground-truth labels.
    Metrics(MetricsArgs),
}

#[derive(Debug, Args)]
struct SegmentArgs {
    #[arg(long)]
    image: PathBuf,
    /// Correct with this epsilon sidecar first.
    #[arg(long)]
    eps: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EdgesArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    eps: Option<PathBuf>,
    #[arg(long, default_value_t = CannyParams::default().sigma)]
    sigma: f64,
    #[arg(long, default_value_t = CannyParams::default().low)]
    low: f64,
    #[arg(long, default_value_t = CannyParams::default().high)]
    high: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MetricsArgs {
    /// Predicted label PNG.
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth label PNG.
    #[arg(long)]
    truth: PathBuf,
    /// Ground-truth class to score.
    #[arg(long)]
    truth_label: u32,
    /// Predicted class; the best-matching class when omitted.
    #[arg(long)]
    pred_label: Option<u32>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    #[arg(long, env = "ORGB_PORT", default_value_t = 8080)]
    port: u16,
    /// Static UI bundle directory.
    #[arg(long)]
    root: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_MAX_IMAGES)]
    max_images: usize,
}

/// Parses `argv` and runs the subcommand. Returns the process exit code:
/// 0 on success, 1 on usage errors, 2 on data errors.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    }
}

fn execute(command: Command) -> anyhow::Result<()> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Estimate(a) => estimate(a),
        Command::Correct(a) => correct_cmd(a),
        Command::Convert(a) => convert_cmd(a),
        Command::Diagnose(a) => diagnose_cmd(a),
        Command::Demo(DemoCommand::Segment(a)) => segment(a),
        Command::Demo(DemoCommand::Edges(a)) => edges(a),
        Command::Demo(DemoCommand::Metrics(a)) => metrics(a),
        Command::Serve(a) => tokio::runtime::Runtime::new()
            .context("starting async runtime")?
            .block_on(service::serve(a.port, a.root, a.max_images)),
    }
}

/// Pretty JSON plus newline, to `path` or standard output.
fn write_json(path: Option<&Path>, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read_epsilon(path: &Path) -> anyhow::Result<Epsilon> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Epsilon::from_json(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_maybe_corrected(image: &Path, eps: Option<&Path>) -> anyhow::Result<LinearImage> {
    let img = load_image(image)?;
    Ok(match eps {
        Some(p) => correct(&img, &read_epsilon(p)?.offset()?),
        None => img,
    })
}

#[derive(Serialize)]
struct PatchTruth {
    index: usize,
    name: String,
    rect: Rect,
    #[serde(flatten)]
    response: PatchResponse,
}

#[derive(Serialize)]
struct SceneTruth {
    patches: Vec<PatchTruth>,
}

#[derive(Serialize)]
struct LineTruth {
    direction: [f64; 3],
    offset: [f64; 3],
    /// Where the line crosses the plane `Σρ = 0`: the offset a full-region
    /// estimate recovers.
    expected_epsilon: [f64; 3],
}

fn simulate(a: SimulateArgs) -> anyhow::Result<()> {
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    let noise = (a.noise_sigma > 0.0).then_some(PixelNoise {
        sigma: a.noise_sigma,
        seed: a.seed,
    });
    let (mut doc, names) = match (a.preset, &a.scene) {
        (Some(Preset::Line), _) => return simulate_line(&a, noise),
        (Some(Preset::Chart), _) => {
            let mut lighting = ChartLighting::daylight(a.ambient.unwrap_or(0.2), a.occlusion.pattern())?;
            lighting.noise = noise;
            let layout = ChartLayout::new(a.width.unwrap_or(192), a.height.unwrap_or(128));
            let names = COLORCHECKER.iter().map(|m| m.name.to_string()).collect();
            (colorchecker_document(&lighting, layout)?, names)
        }
        (Some(Preset::Road), _) => {
            let defaults = RoadScene::default();
            let road = RoadScene {
                width: a.width.unwrap_or(defaults.width),
                height: a.height.unwrap_or(defaults.height),
                ambient: a.ambient.unwrap_or(defaults.ambient),
                ..defaults
            };
            let names = ["verge", "road", "verge"].map(String::from).to_vec();
            (road.document()?, names)
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let doc: SceneDocument =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let names = (0..doc.patches.len()).map(|i| format!("patch-{i}")).collect();
            (doc, names)
        }
        (None, None) => bail!("either --scene or --preset is required"),
    };
    // a scene file keeps its own noise unless the flag overrides it
    if a.preset.is_some() || noise.is_some() {
        doc.noise = noise;
    }

    let rendered = render(&doc.build()?)?;
    let out = |name: &str| a.out_dir.join(name);
    save_image(&rendered.image, out("image.png"), a.depth)?;
    save_float(&rendered.image, out("image.f64"))?;
    save_float(&rendered.phi, out("phi.f64"))?;
    save_float(&rendered.delta, out("delta.f64"))?;
    save_labels(doc.width, doc.height, &rendered.labels, out("labels.png"))?;
    write_json(Some(&out("scene.json")), &doc)?;

    let patches: Vec<PatchTruth> = doc
        .patches
        .iter()
        .zip(&rendered.responses)
        .enumerate()
        .map(|(index, (p, r))| PatchTruth {
            index,
            name: names[index].clone(),
            rect: p.rect,
            response: *r,
        })
        .collect();
    let regions = RegionsFile {
        regions: patches
            .iter()
            .map(|p| NamedRegion {
                name: p.name.clone(),
                rect: p.rect,
            })
            .collect(),
    };
    write_json(Some(&out("regions.json")), &regions)?;
    write_json(Some(&out("truth.json")), &SceneTruth { patches })?;
    log::info!(
        "rendered {}x{} scene with {} patches to {}",
        doc.width,
        doc.height,
        doc.patches.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn simulate_line(a: &SimulateArgs, noise: Option<PixelNoise>) -> anyhow::Result<()> {
    let (w, h) = (a.width.unwrap_or(100), a.height.unwrap_or(100));
    let img = color_line_image(w, h, a.direction, a.offset, (0.2, 1.0), noise)?;
    let k_sum: f64 = a.direction.iter().sum();
    if k_sum == 0.0 {
        bail!("line direction must not sum to zero");
    }
    let t = a.offset.iter().sum::<f64>() / k_sum;
    let truth = LineTruth {
        direction: a.direction,
        offset: a.offset,
        expected_epsilon: [0, 1, 2].map(|j| a.offset[j] - a.direction[j] * t),
    };
    let out = |name: &str| a.out_dir.join(name);
    save_image(&img, out("image.png"), a.depth)?;
    save_float(&img, out("image.f64"))?;
    write_json(Some(&out("truth.json")), &truth)?;
    write_json(
        Some(&out("regions.json")),
        &RegionsFile {
            regions: vec![NamedRegion {
                name: "line".into(),
                rect: Rect::new(0, 0, w, h),
            }],
        },
    )?;
    log::info!("rendered {w}x{h} color line to {}", a.out_dir.display());
    Ok(())
}

fn estimate(a: EstimateArgs) -> anyhow::Result<()> {
    let img = load_image(&a.image)?;
    let mask = make_mask_rect(a.rect, img.width(), img.height())?;
    let eps = estimate_epsilon_with(&img, &mask, a.method)?;
    log::info!("epsilon = {:?} from {} pixels", eps.eps, mask.count());
    write_json(a.out.as_deref(), &eps)
}

fn correct_cmd(a: CorrectArgs) -> anyhow::Result<()> {
    let offset = match (&a.eps, a.epsilon) {
        (Some(path), _) => read_epsilon(path)?.offset()?,
        (None, Some(e)) => Offset::new(e)?,
        (None, None) => bail!("either --eps or --epsilon is required"),
    };
    let img = load_image(&a.image)?;
    save_image(&correct(&img, &offset), &a.out, a.depth)?;
    Ok(())
}

fn is_float_path(p: &Path) -> bool {
    matches!(p.extension().and_then(|e| e.to_str()), Some("f64") | Some("raw"))
}

fn convert_cmd(a: ConvertArgs) -> anyhow::Result<()> {
    let img = load_image(&a.image)?;
    let set = convert(&img, a.space);
    let names: Vec<&str> = match &a.channel {
        Some(c) => {
            if set.channel(c).is_none() {
                bail!(
                    "{:?} has no channel {c:?}; channels: {}",
                    a.space,
                    a.space.channel_names().join(", ")
                );
            }
            vec![c.as_str()]
        }
        None => a.space.channel_names().to_vec(),
    };
    let finish = |mut ch| -> anyhow::Result<_> {
        if a.histeq {
            ch = histogram_equalize(&ch, DEFAULT_HISTEQ_BINS)?;
        }
        if a.invert {
            ch = invert(&ch);
        }
        Ok(ch)
    };
    if let Some(out) = &a.out {
        let raw = set.channel(names[0]).expect("checked above").clone();
        let ch = if is_float_path(out) {
            raw
        } else {
            display_channel(a.space, names[0], &raw)
        };
        save_channel(&finish(ch)?, out, a.depth)?;
        return Ok(());
    }
    let dir = a.out_dir.as_ref().expect("clap requires --out or --out-dir");
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let prefix = format!("{:?}", a.space).to_lowercase();
    for name in names {
        let ch = display_channel(a.space, name, set.channel(name).expect("space channel"));
        save_channel(&finish(ch)?, dir.join(format!("{prefix}_{name}.png")), a.depth)?;
    }
    Ok(())
}

fn diagnose_cmd(a: DiagnoseArgs) -> anyhow::Result<()> {
    let mut img = load_image(&a.image)?;
    if let Some(ambient) = &a.ambient {
        img = subtract_ambient(&img, &load_image(ambient)?)?;
    }
    let mut regions = match &a.regions {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str::<RegionsFile>(&text)
                .with_context(|| format!("parsing {}", path.display()))?
                .regions
        }
        None => Vec::new(),
    };
    regions.extend(a.rect.iter().enumerate().map(|(i, r)| NamedRegion {
        name: format!("rect-{i}"),
        rect: *r,
    }));
    let report = diagnose(&img, &regions)?;
    if let Some(c) = &report.convergence {
        log::info!("{} lines meet near {:?} (rms {:.3e})", report.lines.len(), c.point, c.rms_line_distance);
    }
    write_json(a.out.as_deref(), &report)
}

fn segment(a: SegmentArgs) -> anyhow::Result<()> {
    let img = load_maybe_corrected(&a.image, a.eps.as_deref())?;
    let labels = kmeans_segment(&img, a.k, a.seed)?;
    save_labels(labels.width, labels.height, &labels.labels, &a.out)?;
    Ok(())
}

fn edges(a: EdgesArgs) -> anyhow::Result<()> {
    let img = load_maybe_corrected(&a.image, a.eps.as_deref())?;
    let saturation = convert(&img, ColorSpace::Hsv)
        .channel("s")
        .expect("hsv has s")
        .clone();
    let params = CannyParams {
        sigma: a.sigma,
        low: a.low,
        high: a.high,
    };
    save_channel(&canny_edges(&saturation, params)?, &a.out, BitDepth::Eight)?;
    Ok(())
}

#[derive(Serialize)]
struct MetricsReport {
    pred_label: u32,
    truth_label: u32,
    #[serde(flatten)]
    metrics: SegMetrics,
}

fn metrics(a: MetricsArgs) -> anyhow::Result<()> {
    let (pw, ph, pred) = load_index_png(&a.pred)?;
    let (tw, th, truth) = load_index_png(&a.truth)?;
    if (pw, ph) != (tw, th) {
        bail!("prediction is {pw}x{ph} but truth is {tw}x{th}");
    }
    let gt = RegionMask::from_bits(tw, th, truth.iter().map(|&l| l == a.truth_label).collect())?;
    let (pred_label, m) = match a.pred_label {
        Some(l) => {
            let mask = RegionMask::from_bits(pw, ph, pred.iter().map(|&p| p == l).collect())?;
            (l, segmentation_metrics(&mask, &gt)?)
        }
        None => {
            let k = pred.iter().copied().max().map_or(0, |m| m as usize + 1);
            let labels = LabelImage {
                width: pw,
                height: ph,
                labels: pred,
                k,
            };
            best_label_metrics(&labels, &gt)?
        }
    };
    write_json(
        a.out.as_deref(),
        &MetricsReport {
            pred_label,
            truth_label: a.truth_label,
            metrics: m,
        },
    )
}
