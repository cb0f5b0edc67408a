// oodlab: batch pipeline for cross-domain handwriting-recognition studies.
// Subcommands cover domain ingestion, synthetic-domain rendering, textual and
// visual divergence, error metrics, the factor/regression analysis, checkpoint
// selection and summary reporting.
//
// Exit codes: 0 success, 1 usage error, 2 data/IO error, 3 numerical failure.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "oodlab/alphabet.hpp"
#include "oodlab/analysis.hpp"
#include "oodlab/autoencoder.hpp"
#include "oodlab/csv.hpp"
#include "oodlab/errors.hpp"
#include "oodlab/image.hpp"
#include "oodlab/manifest.hpp"
#include "oodlab/metrics.hpp"
#include "oodlab/ngram.hpp"
#include "oodlab/reports.hpp"
#include "oodlab/rng.hpp"
#include "oodlab/synth.hpp"

namespace {

using namespace oodlab;

// The seed flag is overridden by OODLAB_SEED when that variable is set, so a
// whole pipeline can be re-seeded without touching scripts.
std::uint64_t effective_seed(std::uint64_t flag_value) {
  const char* env = std::getenv("OODLAB_SEED");
  if (env == nullptr || *env == '\0') return flag_value;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (errno != 0 || end == env || *end != '\0') {
    throw CLI::ValidationError("OODLAB_SEED", "must be an unsigned 64-bit integer");
  }
  return static_cast<std::uint64_t>(v);
}

std::vector<DatasetManifest> load_manifests(const std::vector<std::string>& paths) {
  std::vector<DatasetManifest> out;
  std::set<std::string> seen;
  for (const std::string& p : paths) {
    DatasetManifest m = load_manifest(p);
    if (!seen.insert(m.name).second) {
      throw DataError("duplicate domain name '" + m.name + "' across manifests");
    }
    out.push_back(std::move(m));
  }
  return out;
}

std::vector<std::string> read_corpus_lines(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

// Pulls one split of a domain through the image loader and conforms every
// image to the autoencoder input size.
std::vector<GrayImage> load_split_images(const DatasetManifest& m, const std::string& split,
                                         int height, int width) {
  std::vector<GrayImage> images;
  for (const SampleRef& s : m.split(split)) {
    GrayImage img = load_pgm(m.base_dir / s.image_path);
    images.push_back(resize_bilinear(img, height, width));
  }
  if (images.empty()) {
    throw DataError(m.name + ": split '" + split + "' has no images");
  }
  return images;
}

std::filesystem::path params_path(const std::filesystem::path& dir, const std::string& domain) {
  return dir / (domain + ".aeparams");
}

void write_text_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << body;
  if (!out) throw DataError(path.string() + ": write failed");
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestOpts {
  std::vector<std::string> manifests;
  bool check_images = false;
};

void run_ingest(const IngestOpts& o) {
  const std::vector<DatasetManifest> domains = load_manifests(o.manifests);
  for (const DatasetManifest& m : domains) {
    std::cout << m.name << ": language=" << m.language;
    for (const std::string& split : split_names()) {
      std::cout << " " << split << "="
                << (m.has_split(split) ? m.split(split).size() : std::size_t{0});
    }
    std::cout << " total=" << m.total_samples() << "\n";
    if (o.check_images) {
      for (const auto& [split, samples] : m.splits) {
        (void)split;
        for (const SampleRef& s : samples) load_pgm(m.base_dir / s.image_path);
      }
    }
  }
  const Alphabet alphabet = build_alphabet(domains);
  std::cout << "alphabet: " << alphabet.size() << " symbols\n";
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOpts {
  std::string text_path;
  std::string out_dir;
  std::string name;
  std::string language;
  StyleParams style;
  int height = 32;
  std::uint64_t seed = 42;
};

void run_synth(SynthOpts o) {
  o.style.seed = effective_seed(o.seed);
  const std::vector<std::string> lines = read_corpus_lines(o.text_path);
  const DatasetManifest m =
      make_domain(lines, builtin_font(), o.style, o.out_dir, o.name, o.language, o.height);
  // Small corpora may leave val/test empty; report zero rather than tripping
  // the strict split accessor.
  auto count = [&m](const char* split) {
    return m.has_split(split) ? m.split(split).size() : std::size_t{0};
  };
  std::cout << m.name << ": rendered " << m.total_samples() << " lines into " << o.out_dir
            << " (train=" << count("train") << " val=" << count("val")
            << " test=" << count("test") << ")\n";
}

// ---------------------------------------------------------------------------
// textdiv
// ---------------------------------------------------------------------------

struct TextdivOpts {
  std::vector<std::string> manifests;
  std::string split = "train";
  std::string out_path;
  std::string heatmap_path;
  bool normalize = false;
  int nmax = 5;
  double alpha = 1.0;
};

void run_textdiv(const TextdivOpts& o) {
  const std::vector<DatasetManifest> domains = load_manifests(o.manifests);
  std::vector<std::vector<std::string>> corpora;
  std::vector<std::string> names;
  for (const DatasetManifest& m : domains) {
    std::vector<std::string> corpus;
    for (const std::string& t : m.transcripts(o.split)) corpus.push_back(fold_to_ascii(t));
    corpora.push_back(std::move(corpus));
    names.push_back(m.name);
  }
  const NamedMatrix matrix = divergence_matrix(corpora, names, o.normalize, o.nmax, o.alpha);
  write_named_matrix(matrix, o.out_path);
  if (!o.heatmap_path.empty()) {
    NamedMatrix scaled = matrix;
    if (!o.normalize) normalize_offdiagonal(scaled);
    write_heatmap(scaled, o.heatmap_path);
  }
  std::cout << "wrote " << names.size() << "x" << names.size() << " text-divergence matrix to "
            << o.out_path << "\n";
}

// ---------------------------------------------------------------------------
// visdiv train / score
// ---------------------------------------------------------------------------

struct VisdivOpts {
  std::vector<std::string> manifests;
  std::string params_dir;
  std::string split = "test";
  std::string out_path;
  std::string heatmap_path;
  bool normalize = false;
  AEConfig config;
  TrainOptions train_opts;
  std::uint64_t seed = 42;
  int jobs = 1;
};

void run_visdiv_train(const VisdivOpts& o) {
  const std::uint64_t seed = effective_seed(o.seed);
  const std::vector<DatasetManifest> domains = load_manifests(o.manifests);
  std::filesystem::create_directories(o.params_dir);

  struct Unit {
    std::string message;
    std::exception_ptr error;
  };
  std::vector<Unit> units(domains.size());

  auto train_one = [&](std::size_t i) {
    try {
      const DatasetManifest& m = domains[i];
      AEConfig cfg = o.config;
      cfg.seed = mix_seed(seed, fnv1a(m.name));
      const auto train = load_split_images(m, "train", cfg.input_h, cfg.input_w);
      const auto val = load_split_images(m, "val", cfg.input_h, cfg.input_w);
      const TrainResult result = train_autoencoder(cfg, train, val, o.train_opts);
      save_ae_params(result.params, params_path(o.params_dir, m.name));
      char line[160];
      std::snprintf(line, sizeof(line), "%s: best epoch %d, val mse %.6g\n", m.name.c_str(),
                    result.best_epoch, result.best_val_mse);
      units[i].message = line;
    } catch (...) {
      units[i].error = std::current_exception();
    }
  };

  // Domains are independent work units; run them in bounded batches when more
  // than one job is requested, assembling output in domain order.
  const int jobs = std::max(1, o.jobs);
  for (std::size_t base = 0; base < domains.size(); base += static_cast<std::size_t>(jobs)) {
    std::vector<std::thread> pool;
    for (std::size_t i = base; i < std::min(domains.size(), base + jobs); ++i) {
      pool.emplace_back(train_one, i);
    }
    for (std::thread& t : pool) t.join();
  }
  for (const Unit& u : units) {
    if (u.error) std::rethrow_exception(u.error);
    std::cout << u.message;
  }
}

void run_visdiv_score(const VisdivOpts& o) {
  const std::vector<DatasetManifest> domains = load_manifests(o.manifests);
  std::vector<std::string> names;
  for (const DatasetManifest& m : domains) names.push_back(m.name);

  const int n = static_cast<int>(domains.size());
  NamedMatrix matrix;
  matrix.names = names;
  matrix.values = Matrix(n, n);
  for (int s = 0; s < n; ++s) {
    const AEParams params = load_ae_params(params_path(o.params_dir, names[s]));
    for (int t = 0; t < n; ++t) {
      const auto images =
          load_split_images(domains[t], o.split, params.config.input_h, params.config.input_w);
      matrix.values(s, t) = visual_divergence(params, images);
    }
  }
  if (o.normalize) normalize_offdiagonal(matrix);
  write_named_matrix(matrix, o.out_path);
  if (!o.heatmap_path.empty()) {
    NamedMatrix scaled = matrix;
    if (!o.normalize) normalize_offdiagonal(scaled);
    write_heatmap(scaled, o.heatmap_path);
  }
  std::cout << "wrote " << n << "x" << n << " visual-divergence matrix to " << o.out_path << "\n";
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalOpts {
  std::string pred_path;
  std::string out_path;
  bool ece = false;
  int bins = 15;
};

void run_eval(const EvalOpts& o) {
  const std::vector<PredictionRecord> records = load_prediction_log(o.pred_path);
  nlohmann::json j;
  j["samples"] = records.size();
  j["cer"] = corpus_cer(records);
  j["wer"] = corpus_wer(records);
  if (o.ece) j["ece"] = expected_calibration_error(records, o.bins);
  const std::string body = j.dump(2) + "\n";
  if (o.out_path.empty()) {
    std::cout << body;
  } else {
    write_text_file(o.out_path, body);
    std::cout << "wrote metrics for " << records.size() << " samples to " << o.out_path << "\n";
  }
}

// ---------------------------------------------------------------------------
// analyze
// ---------------------------------------------------------------------------

struct AnalyzeOpts {
  std::string metrics_path;
  std::string factors_path;
  std::string regression_path;
  std::vector<std::string> features;
  double bucket_width = 5.0;
  std::uint64_t seed = 42;
};

void run_analyze(const AnalyzeOpts& o) {
  const std::uint64_t seed = effective_seed(o.seed);
  const MetricsTable table = load_metrics_table(o.metrics_path);

  const FactorModel fm = factor_analysis(table, metric_column_names(), seed);
  write_text_file(o.factors_path, factor_report_json(fm));

  const std::vector<std::string>& features =
      o.features.empty() ? label_free_features() : o.features;
  const RegressionModel model = fit_ood_regressor(table, features);
  const RegressionEvaluation eval = evaluate_regressor(table, features);
  write_text_file(o.regression_path, regression_report_json(model, eval, o.bucket_width));

  char line[160];
  std::snprintf(line, sizeof(line),
                "rows %zu, retained factors %d, leave-one-domain-out mae %.4g mse %.4g\n",
                table.rows.size(), fm.retained, eval.mae, eval.mse);
  std::cout << line;
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

struct SelectOpts {
  std::string val_path;
  std::string strategy = "no-selection";
  std::string domain;
};

void run_select(const SelectOpts& o) {
  const std::vector<ValRecord> records = load_val_records(o.val_path);
  const SelectionStrategy strategy = parse_strategy(o.strategy);
  const std::string chosen = select_model(records, strategy, o.domain);
  std::cout << chosen << "\n";
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

struct ReportOpts {
  std::string cross_path;
  std::string outliers_path;
  std::string out_dir = ".";
};

void run_report(const ReportOpts& o) {
  std::vector<std::string> model_order;
  const std::map<std::string, CrossTable> tables = load_cross_tables(o.cross_path, &model_order);
  std::map<std::string, std::set<std::string>> outliers;
  if (!o.outliers_path.empty()) outliers = load_outliers(o.outliers_path);

  std::vector<ModelSummary> summaries;
  for (const std::string& model : model_order) {
    const auto marks = outliers.count(model) ? outliers.at(model) : std::set<std::string>{};
    summaries.push_back(aggregate_summary(model, tables.at(model), marks));
  }
  std::filesystem::create_directories(o.out_dir);
  const std::filesystem::path dir = o.out_dir;
  write_summary_csv(summaries, dir / "summary.csv");
  write_targets_csv(summaries, dir / "targets.csv");
  for (const ModelSummary& s : summaries) {
    char line[200];
    std::snprintf(line, sizeof(line), "%s: mean id %.1f, mean best-source ood %.1f, gap %.1f\n",
                  s.model.c_str(), s.mean_id, s.mean_ood, s.mean_gap);
    std::cout << line;
  }
  std::cout << "wrote " << (dir / "summary.csv").string() << " and "
            << (dir / "targets.csv").string() << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-domain handwriting-recognition analysis pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from an INI-style key=value file");
  app.footer("Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.\n"
             "OODLAB_SEED, when set, overrides every --seed flag.");

  IngestOpts ingest;
  CLI::App* c_ingest = app.add_subcommand("ingest", "Validate domain manifests and summarize them");
  c_ingest->add_option("manifests", ingest.manifests, "Manifest files (one per domain)")
      ->required()
      ->expected(-1);
  c_ingest->add_flag("--check-images", ingest.check_images, "Also decode every referenced image");
  c_ingest->callback([&] { run_ingest(ingest); });

  SynthOpts synth;
  CLI::App* c_synth = app.add_subcommand("synth", "Render a synthetic text-line domain");
  c_synth->add_option("--text", synth.text_path, "Corpus file, one line per image")->required();
  c_synth->add_option("--out", synth.out_dir, "Output domain directory")->required();
  c_synth->add_option("--name", synth.name, "Domain name")->required();
  c_synth->add_option("--language", synth.language, "Two-letter language code")->required();
  c_synth->add_option("--scale", synth.style.scale, "Glyph magnification")
      ->capture_default_str();
  c_synth->add_option("--slant", synth.style.slant, "Shear factor per row")->capture_default_str();
  c_synth->add_option("--ink", synth.style.ink, "Stroke dilation radius")
      ->check(CLI::Range(0, 2))
      ->capture_default_str();
  c_synth->add_option("--noise", synth.style.noise_sigma, "Gaussian pixel-noise std")
      ->capture_default_str();
  c_synth->add_option("--jitter", synth.style.baseline_jitter, "Max per-glyph vertical offset")
      ->capture_default_str();
  c_synth->add_option("--height", synth.height, "Canvas height in pixels")->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "Rendering seed")->capture_default_str();
  c_synth->callback([&] { run_synth(synth); });

  TextdivOpts textdiv;
  CLI::App* c_textdiv =
      app.add_subcommand("textdiv", "Character n-gram divergence between domain transcripts");
  c_textdiv->add_option("manifests", textdiv.manifests, "Manifest files (two or more)")
      ->required()
      ->expected(-1);
  c_textdiv->add_option("--split", textdiv.split, "Split whose transcripts are compared")
      ->capture_default_str();
  c_textdiv->add_option("--out", textdiv.out_path, "Output CSV matrix")->required();
  c_textdiv->add_option("--heatmap", textdiv.heatmap_path, "Optional PGM heatmap path");
  c_textdiv->add_flag("--normalize", textdiv.normalize,
                      "Rescale off-diagonal entries to the 0-100 range");
  c_textdiv->add_option("--nmax", textdiv.nmax, "Largest n-gram order averaged")
      ->check(CLI::Range(1, 5))
      ->capture_default_str();
  c_textdiv->add_option("--alpha", textdiv.alpha, "Additive smoothing weight")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_textdiv->callback([&] { run_textdiv(textdiv); });

  VisdivOpts visdiv;
  CLI::App* c_visdiv =
      app.add_subcommand("visdiv", "Autoencoder reconstruction-error divergence between domains");
  c_visdiv->require_subcommand(1);

  CLI::App* c_vtrain = c_visdiv->add_subcommand("train", "Fit one autoencoder per source domain");
  c_vtrain->add_option("manifests", visdiv.manifests, "Manifest files (one per domain)")
      ->required()
      ->expected(-1);
  c_vtrain->add_option("--params", visdiv.params_dir, "Directory for <domain>.aeparams files")
      ->required();
  c_vtrain->add_option("--height", visdiv.config.input_h, "Input height")->capture_default_str();
  c_vtrain->add_option("--width", visdiv.config.input_w, "Input width")->capture_default_str();
  c_vtrain->add_option("--channels", visdiv.config.channels, "Channel progression, e.g. 1,8,16")
      ->delimiter(',')
      ->capture_default_str();
  c_vtrain->add_option("--latent", visdiv.config.latent_dim, "Bottleneck width")
      ->capture_default_str();
  c_vtrain->add_option("--epochs", visdiv.train_opts.epochs, "Training epochs")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_vtrain->add_option("--batch", visdiv.train_opts.batch_size, "Mini-batch size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_vtrain->add_option("--seed", visdiv.seed, "Base seed, mixed per domain")
      ->capture_default_str();
  c_vtrain->add_option("--jobs", visdiv.jobs, "Domains trained concurrently")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_vtrain->callback([&] { run_visdiv_train(visdiv); });

  CLI::App* c_vscore =
      c_visdiv->add_subcommand("score", "Score every domain against every trained autoencoder");
  c_vscore->add_option("manifests", visdiv.manifests, "Manifest files (one per domain)")
      ->required()
      ->expected(-1);
  c_vscore->add_option("--params", visdiv.params_dir, "Directory holding <domain>.aeparams")
      ->required();
  c_vscore->add_option("--split", visdiv.split, "Split scored for every domain")
      ->capture_default_str();
  c_vscore->add_option("--out", visdiv.out_path, "Output CSV matrix")->required();
  c_vscore->add_option("--heatmap", visdiv.heatmap_path, "Optional PGM heatmap path");
  c_vscore->add_flag("--normalize", visdiv.normalize,
                     "Rescale off-diagonal entries to the 0-100 range");
  c_vscore->callback([&] { run_visdiv_score(visdiv); });

  EvalOpts eval;
  CLI::App* c_eval = app.add_subcommand("eval", "Error and calibration metrics for a prediction log");
  c_eval->add_option("--pred", eval.pred_path, "Tab-separated prediction log")->required();
  c_eval->add_option("--out", eval.out_path, "Output JSON path (stdout when omitted)");
  c_eval->add_flag("--ece", eval.ece, "Also compute calibration error (needs confidences)");
  c_eval->add_option("--bins", eval.bins, "Calibration bins")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_eval->callback([&] { run_eval(eval); });

  AnalyzeOpts analyze;
  CLI::App* c_analyze =
      app.add_subcommand("analyze", "Factor analysis and error regression over a metrics table");
  c_analyze->add_option("--metrics", analyze.metrics_path, "Metrics CSV")->required();
  c_analyze->add_option("--out-factors", analyze.factors_path, "Factor report JSON path")
      ->required();
  c_analyze->add_option("--out-regression", analyze.regression_path, "Regression report JSON path")
      ->required();
  c_analyze->add_option("--features", analyze.features,
                        "Regression feature columns (default: the label-free set)")
      ->delimiter(',');
  c_analyze->add_option("--bucket-width", analyze.bucket_width, "Residual bucket width")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_analyze->add_option("--seed", analyze.seed, "Rotation multi-start seed")
      ->capture_default_str();
  c_analyze->callback([&] { run_analyze(analyze); });

  SelectOpts select;
  CLI::App* c_select =
      app.add_subcommand("select", "Pick a checkpoint from per-domain validation scores");
  c_select->add_option("--val", select.val_path, "CSV of checkpoint,domain,val_cer")->required();
  c_select->add_option("--strategy", select.strategy, "no-selection | heldout | oracle")
      ->check(CLI::IsMember({"no-selection", "heldout", "oracle"}))
      ->capture_default_str();
  c_select->add_option("--domain", select.domain,
                       "Source domain (no-selection) or target domain (heldout/oracle)")
      ->required();
  c_select->callback([&] { run_select(select); });

  ReportOpts report;
  CLI::App* c_report =
      app.add_subcommand("report", "Per-target ID/OOD summary tables from a cross-domain grid");
  c_report->add_option("--cross", report.cross_path, "CSV of model,source,target,cer")->required();
  c_report->add_option("--outliers", report.outliers_path,
                       "CSV of model,target rows excluded from averages");
  c_report->add_option("--out-dir", report.out_dir, "Directory for summary.csv and targets.csv")
      ->capture_default_str();
  c_report->callback([&] { run_report(report); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
