// Command-line front end: ingest, simulate, analyze and verify.

#include <pcacomp/pcacomp.hpp>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pcacomp;

namespace {

struct GlobalOptions {
  std::uint64_t seed = 1;
  Index pcs = 25;
  int threads = 0;
  std::string out_dir = "pcacomp-out";
  std::string format = "tsv";
};

struct InputOptions {
  std::string matrix;
  std::string labels;
  std::string matrix_format = "auto";
  bool samples_as_rows = false;
  bool log1p = false;
  std::string model;
};

struct RunContext {
  std::string command;
  std::vector<std::string> argv;
  const GlobalOptions* global = nullptr;
  json inputs = json::object();
  json outputs = json::array();
  json extra = json::object();
};

void write_text(RunContext& ctx, const std::string& name, const std::string& text) {
  const fs::path path = fs::path(ctx.global->out_dir) / name;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write '" + path.string() + "'");
  out << text;
  ctx.outputs.push_back(name);
}

void write_json(RunContext& ctx, const std::string& name, const json& j) { write_text(ctx, name, j.dump(2) + "\n"); }

void emit(RunContext& ctx, const std::string& stem, const json& j, const std::string& tsv) {
  write_json(ctx, stem + ".json", j);
  if (!tsv.empty()) write_text(ctx, stem + ".tsv", tsv);
  std::cout << (ctx.global->format == "json" || tsv.empty() ? j.dump(2) + "\n" : tsv);
}

json file_entry(const std::string& path) {
  json e{{"path", path}};
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  if (!ec) e["bytes"] = size;
  return e;
}

void write_manifest(RunContext& ctx, int exit_code, const std::string& error) {
  json m;
  m["command"] = ctx.command;
  m["argv"] = ctx.argv;
  m["seed"] = ctx.global->seed;
  m["pcs"] = ctx.global->pcs;
  m["threads"] = num_threads();
  m["format"] = ctx.global->format;
  m["inputs"] = ctx.inputs;
  m["outputs"] = ctx.outputs;
  m["exit_code"] = exit_code;
  if (!error.empty()) m["error"] = error;
  m["versions"] = {{"pcacomp", kVersion},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"compiler", __VERSION__},
                   {"zlib", ZLIB_VERSION}};
  m["details"] = ctx.extra;
  std::error_code ec;
  fs::create_directories(ctx.global->out_dir, ec);
  std::ofstream out(fs::path(ctx.global->out_dir) / "manifest.json");
  if (out) out << m.dump(2) << "\n";
}

void add_input_flags(CLI::App* cmd, InputOptions& in, bool allow_model) {
  cmd->add_option("--matrix", in.matrix, "Matrix file (.mtx, .csv, optionally .gz)");
  cmd->add_option("--labels", in.labels, "Labels: one per line, or id,label CSV");
  cmd->add_option("--matrix-format", in.matrix_format, "mtx | csv | auto")
      ->check(CLI::IsMember({"mtx", "csv", "auto"}));
  cmd->add_flag("--samples-as-rows", in.samples_as_rows, "File stores samples as rows (transpose on load)");
  cmd->add_flag("--log1p", in.log1p, "Apply natural log(1 + x) after loading");
  if (allow_model) cmd->add_option("--model", in.model, "Model JSON; draws one dataset with --seed");
}

RandomVectorModel read_model(RunContext& ctx, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open model '" + path + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("model '" + path + "' is not valid JSON: " + e.what());
  }
  ctx.inputs["model"] = file_entry(path);
  return model_from_json(j);
}

DataMatrix load_input(RunContext& ctx, const InputOptions& in) {
  if (!in.model.empty()) {
    if (!in.matrix.empty()) throw InputError("pass either --matrix or --model, not both");
    const auto model = read_model(ctx, in.model);
    DataMatrix a = generate_dataset(model, ctx.global->seed);
    return in.log1p ? log_normalize(a) : a;
  }
  if (in.matrix.empty()) throw InputError("an input is required: --matrix (with --labels) or --model");
  IngestSpec spec;
  spec.matrix_path = in.matrix;
  spec.format = in.matrix_format == "mtx"   ? MatrixFormat::MatrixMarket
                : in.matrix_format == "csv" ? MatrixFormat::DenseCsv
                                            : MatrixFormat::Auto;
  spec.rows_are_features = !in.samples_as_rows;
  if (!in.labels.empty()) spec.labels_path = in.labels;
  spec.log1p = in.log1p;
  ctx.inputs["matrix"] = file_entry(in.matrix);
  if (!in.labels.empty()) ctx.inputs["labels"] = file_entry(in.labels);
  ctx.extra["log1p"] = in.log1p;
  ctx.extra["orientation"] = in.samples_as_rows ? "samples-as-rows" : "rows-are-features";
  return load_matrix(spec);
}

Index checked_pcs(const DataMatrix& a, Index pcs) {
  const Index full = std::min(a.rows(), a.cols());
  if (pcs < 1 || pcs > full)
    throw InputError("--pcs " + std::to_string(pcs) + " outside [1, " + std::to_string(full) + "]");
  return pcs;
}

std::vector<Index> parse_grid(const std::string& text) {
  std::vector<Index> grid;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      grid.push_back(static_cast<Index>(v));
    } catch (const std::exception&) {
      throw InputError("PC grid entry '" + item + "' is not a positive integer");
    }
  }
  if (grid.empty()) throw InputError("PC grid is empty");
  return grid;
}

}  // namespace

int main(int argc, char** argv) {
  GlobalOptions global;
  CLI::App app{"Relative compression of truncated PCA on clustered data"};
  app.require_subcommand(1);
  app.fallthrough();
  app.add_option("--seed", global.seed, "Random seed");
  app.add_option("--pcs", global.pcs, "Number of principal components k'")->check(CLI::PositiveNumber);
  app.add_option("--threads", global.threads, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  app.add_option("--out-dir", global.out_dir, "Directory for reports and the run manifest");
  app.add_option("--format", global.format, "Report format on stdout")->check(CLI::IsMember({"json", "tsv"}));

  // analyze
  InputOptions analyze_in;
  bool analyze_centered = false;
  std::size_t analyze_samples = 0;
  bool analyze_points = false;
  auto* analyze = app.add_subcommand("analyze", "Ingest, fit PCA and report compression tables and curves");
  add_input_flags(analyze, analyze_in, true);
  analyze->add_flag("--centered", analyze_centered, "Use centered PCA");
  analyze->add_option("--sample-pairs", analyze_samples, "Sample this many pairs instead of all pairs");
  analyze->add_flag("--points", analyze_points, "Also write per-point summaries");

  // simulate
  std::string sim_model;
  std::string sim_matrix_format = "mtx";
  bool sim_gzip = false;
  auto* simulate = app.add_subcommand("simulate", "Draw a dataset from a model document");
  simulate->add_option("--model", sim_model, "Model JSON")->required();
  simulate->add_option("--matrix-format", sim_matrix_format, "mtx | csv")->check(CLI::IsMember({"mtx", "csv"}));
  simulate->add_flag("--gzip", sim_gzip, "Compress the matrix file");

  // verify-bounds
  std::string vb_model;
  double vb_c0 = 1.0;
  std::size_t vb_seeds = 20;
  bool vb_data_sk = false;
  auto* verify = app.add_subcommand("verify-bounds", "Monte-Carlo check of the closed-form compression bounds");
  verify->add_option("--model", vb_model, "Model JSON")->required();
  verify->add_option("--C0", vb_c0, "Calibration constant")->check(CLI::PositiveNumber);
  verify->add_option("--seeds", vb_seeds, "Number of seeds, starting at --seed")->check(CLI::PositiveNumber);
  verify->add_flag("--data-sk", vb_data_sk, "Use s_k of each draw instead of the mean-matrix");

  // compare-centering
  InputOptions cc_in;
  auto* centering = app.add_subcommand("compare-centering", "Uncentered vs centered PCA compression");
  add_input_flags(centering, cc_in, true);

  // cluster-compare
  InputOptions cl_in;
  std::size_t cl_seeds = 10;
  Index cl_neighbors = 20;
  Index cl_k = 0;
  auto* cluster = app.add_subcommand("cluster-compare", "Raw k-means vs PCA k-means vs PCA kNN + Louvain");
  add_input_flags(cluster, cl_in, true);
  cluster->add_option("--seeds", cl_seeds, "Number of k-means seeds")->check(CLI::PositiveNumber);
  cluster->add_option("--neighbors", cl_neighbors, "Neighbours per node")->check(CLI::PositiveNumber);
  cluster->add_option("-k,--clusters", cl_k, "Cluster count (default: label count)");

  // sweep-pcs
  InputOptions sw_in;
  std::string sw_grid = "5,10,25,50";
  auto* sweep = app.add_subcommand("sweep-pcs", "Cluster compression across a grid of PC counts");
  add_input_flags(sweep, sw_in, true);
  sweep->add_option("--grid", sw_grid, "Comma-separated PC counts");

  // calibrate-c0
  std::string cal_model;
  std::size_t cal_seeds = 100;
  auto* calibrate = app.add_subcommand("calibrate-c0", "Smallest C0 with ||E|| <= C0 sigma sqrt(d+n) on every seed");
  calibrate->add_option("--model", cal_model, "Model JSON")->required();
  calibrate->add_option("--seeds", cal_seeds, "Number of seeds, starting at --seed")->check(CLI::PositiveNumber);

  RunContext ctx;
  ctx.global = &global;
  for (int i = 0; i < argc; ++i) ctx.argv.emplace_back(argv[i]);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    ctx.command = "parse";
    write_manifest(ctx, 2, e.what());
    return 2;
  }

  ctx.command = app.get_subcommands().front()->get_name();
  int code = 0;
  std::string error;
  try {
    set_num_threads(global.threads);
    fs::create_directories(global.out_dir);

    if (*analyze) {
      DataMatrix a = load_input(ctx, analyze_in);
      const Index pcs = checked_pcs(a, global.pcs);
      SvdOptions svd;
      svd.seed = global.seed;
      const Projector p = analyze_centered ? fit_centered_pca(a, pcs, svd) : fit_uncentered_pca(a, pcs, svd);
      ctx.extra["centered"] = analyze_centered;
      ctx.extra["gap_warning"] = p.gap_warning();
      const auto policy = analyze_samples ? PairPolicy::sampled(analyze_samples, global.seed) : PairPolicy::exact();
      ctx.extra["pairs"] = analyze_samples ? "sampled" : "exact";
      if (a.has_labels()) {
        const auto pairs = pair_compression(a, p, policy);
        const auto summary = cluster_summary(pairs, *a.labels());
        json j = cluster_summary_json(summary);
        j["pcs"] = pcs;
        j["gap_warning"] = p.gap_warning();
        std::vector<double> sv(p.singular_values().data(), p.singular_values().data() + pcs);
        j["singular_values"] = sv;
        emit(ctx, "summary", j, cluster_summary_tsv(summary));
        const auto grid = default_curve_grid();
        write_text(ctx, "curve.csv", curve_csv(intra_fraction_curve(pairs, *a.labels(), grid)));
        if (analyze_points) {
          if (analyze_samples) throw InputError("--points needs the exact pair set; drop --sample-pairs");
          write_text(ctx, "points.csv", point_summary_csv(pointwise_summary(pairs, *a.labels())));
        }
      } else {
        DistanceAccumulator all;
        for_each_pair(a, p, policy, [&](const PairStats& s) { all.add(s); });
        const auto avg = all.finish();
        json j{{"pcs", pcs}, {"all_pairs", detail::averages_json(avg)}, {"gap_warning", p.gap_warning()}};
        emit(ctx, "summary", j, "");
      }
    } else if (*simulate) {
      const auto model = read_model(ctx, sim_model);
      const DataMatrix a = generate_dataset(model, global.seed);
      const std::string ext = sim_matrix_format == "mtx" ? ".mtx" : ".csv";
      const std::string name = "matrix" + ext + (sim_gzip ? ".gz" : "");
      const auto path = (fs::path(global.out_dir) / name).string();
      if (sim_matrix_format == "mtx")
        write_matrix_market(path, a);
      else
        write_dense_csv(path, a);
      ctx.outputs.push_back(name);
      write_labels((fs::path(global.out_dir) / "labels.txt").string(), *a.labels());
      ctx.outputs.push_back("labels.txt");
      const auto stats = model_stats(model);
      json j{{"stats", model_stats_json(stats)},
             {"regime", regime_json(regime_check(stats, model.d(), model.n(), model.k()))},
             {"model", model_to_json(model)}};
      emit(ctx, "model_stats", j, "");
    } else if (*verify) {
      const auto model = read_model(ctx, vb_model);
      VerifyOptions opts;
      opts.use_data_s_k = vb_data_sk;
      opts.svd.seed = global.seed;
      const auto report = verify_bounds(model, seed_range(global.seed, vb_seeds), global.pcs, vb_c0, opts);
      json j = bound_report_to_json(report);
      const auto stats = model_stats(model);
      j["regime"] = regime_json(regime_check(stats, model.d(), model.n(), model.k()));
      emit(ctx, "bounds", j, bound_report_tsv(report));
    } else if (*centering) {
      const DataMatrix a = load_input(ctx, cc_in);
      a.require_labels();
      SvdOptions svd;
      svd.seed = global.seed;
      const auto report = centering_comparison(a, checked_pcs(a, global.pcs), svd);
      emit(ctx, "centering", centering_report_json(report), centering_report_tsv(report));
    } else if (*cluster) {
      const DataMatrix a = load_input(ctx, cl_in);
      const Labels& truth = a.require_labels();
      const Index k = cl_k > 0 ? cl_k : truth.k;
      PipelineOptions opts;
      opts.neighbors = cl_neighbors;
      opts.svd.seed = global.seed;
      const auto report = pipeline_compare(a, k, checked_pcs(a, global.pcs), seed_range(global.seed, cl_seeds), opts);
      emit(ctx, "comparison", comparison_report_json(report), comparison_report_tsv(report));
    } else if (*sweep) {
      const DataMatrix a = load_input(ctx, sw_in);
      a.require_labels();
      const auto grid = parse_grid(sw_grid);
      SvdOptions svd;
      svd.seed = global.seed;
      Index largest = 0;
      for (Index g : grid) largest = std::max(largest, checked_pcs(a, g));
      const Projector full = fit_uncentered_pca(a, largest, svd);
      json j = json::array();
      std::string tsv;
      for (Index g : grid) {
        const auto summary = summarize_compression(a, full.leading(g));
        j.push_back({{"pcs", g}, {"summary", cluster_summary_json(summary)}});
        tsv += "# pcs = " + std::to_string(g) + "\n" + cluster_summary_tsv(summary);
      }
      emit(ctx, "sweep", j, tsv);
    } else if (*calibrate) {
      const auto model = read_model(ctx, cal_model);
      const auto result = calibrate_c0(model, seed_range(global.seed, cal_seeds));
      json j{{"C0", result.C0}, {"seeds", cal_seeds}, {"first_seed", global.seed}, {"ratios", result.ratios}};
      emit(ctx, "calibration", j, "");
    }
  } catch (const InputError& e) {
    code = 2;
    error = e.what();
  } catch (const NumericalError& e) {
    code = 3;
    error = e.what();
  } catch (const std::bad_alloc&) {
    code = 3;
    error = "out of memory";
  }
  if (code != 0) std::cerr << "error: " << error << "\n";
  write_manifest(ctx, code, error);
  return code;
}
