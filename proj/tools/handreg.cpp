// Command-line entry point: gen-data, train, eval, infer, plot, export-crops.

#include <CLI11.hpp>
#include <fstream>
#include <iostream>

#include "handreg/common/error.hpp"
#include "handreg/harness/infer.hpp"
#include "handreg/harness/plot.hpp"
#include "handreg/harness/train.hpp"

using namespace handreg;

namespace {

constexpr int kExitUsage = 1;

std::ofstream open_out(const std::filesystem::path& p, bool binary = false) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream os(p, binary ? std::ios::binary : std::ios::out);
  HANDREG_THROW_IF(!os, ErrorCode::Io, "cannot write " + p.string());
  return os;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream is(p);
  HANDREG_THROW_IF(!is, ErrorCode::Io, "cannot open " + p.string());
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

std::optional<harness::InferView> load_view(const std::string& path,
                                            const std::vector<double>& box_arg) {
  if (path.empty()) return std::nullopt;
  harness::InferView v{synth::load_pgm(path), {}};
  if (box_arg.size() == 4) {
    v.box = {box_arg[0], box_arg[1], box_arg[2], box_arg[3]};
  } else {
    const auto box = harness::box_from_comments(v.crop);
    HANDREG_THROW_IF(!box, ErrorCode::Format,
                     path + ": no 'box' comment; pass the crop box explicitly");
    v.box = *box;
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"World-frame 3D hand keypoint regression from fisheye crops"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-data", "generate a synthetic stereo fisheye dataset");
  std::string gen_config, gen_out;
  std::uint64_t gen_seed = 0;
  int gen_threads = 0;
  gen->add_option("--config", gen_config, "dataset config (key = value)")->required();
  gen->add_option("--out", gen_out, "output directory")->required();
  gen->add_option("--seed", gen_seed, "generator seed")->required();
  gen->add_option("--threads", gen_threads, "worker threads (output is identical for any count)");

  auto* train = app.add_subcommand("train", "train a model");
  std::string train_config, train_data, train_out, train_metrics;
  bool train_quiet = false;
  train->add_option("--config", train_config, "training config (key = value)")->required();
  train->add_option("--data", train_data, "dataset directory (overrides 'data' in the config)");
  train->add_option("--out", train_out, "checkpoint path")->required();
  train->add_option("--metrics", train_metrics, "metrics log path (default <out>.metrics.tsv)");
  train->add_flag("--quiet", train_quiet, "no progress output");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
  std::string eval_ckpt, eval_data, eval_split = "test", eval_report;
  eval->add_option("--ckpt", eval_ckpt, "checkpoint")->required();
  eval->add_option("--data", eval_data, "dataset directory")->required();
  eval->add_option("--split", eval_split, "train, val or test");
  eval->add_option("--report", eval_report, "JSON report path")->required();

  auto* inf = app.add_subcommand("infer", "predict a hand from one or two crops");
  std::string inf_ckpt, inf_left, inf_right, inf_rig, inf_obj;
  std::vector<double> inf_left_box, inf_right_box;
  inf->add_option("--ckpt", inf_ckpt, "checkpoint")->required();
  inf->add_option("--left", inf_left, "left crop (PGM)");
  inf->add_option("--right", inf_right, "right crop (PGM)");
  inf->add_option("--rig", inf_rig, "rig calibration")->required();
  inf->add_option("--left-box", inf_left_box, "left crop box x_min y_min x_max y_max")->expected(4);
  inf->add_option("--right-box", inf_right_box, "right crop box x_min y_min x_max y_max")->expected(4);
  inf->add_option("--obj", inf_obj, "write the parametric mesh as OBJ");

  auto* plot = app.add_subcommand("plot", "write plot-ready tables");
  std::string plot_report, plot_log, plot_out;
  plot->add_option("--report", plot_report, "evaluation report (JSON)");
  plot->add_option("--log", plot_log, "training metrics log");
  plot->add_option("--out", plot_out, "output directory")->required();

  auto* exp = app.add_subcommand("export-crops", "write dataset crops as PGM with box comments");
  std::string exp_data, exp_split = "test", exp_out;
  int exp_count = 10;
  exp->add_option("--data", exp_data, "dataset directory")->required();
  exp->add_option("--split", exp_split, "train, val or test");
  exp->add_option("--count", exp_count, "number of records");
  exp->add_option("--out", exp_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (gen->parsed()) {
      const auto kv = KeyValues::load(gen_config);
      auto cfg = synth::DataConfig::from_key_values(kv);
      kv.check_all_used();
      if (gen_threads > 0) cfg.threads = gen_threads;
      const auto m = synth::generate_dataset(cfg, gen_seed, gen_out);
      std::cout << "wrote " << gen_out << ":";
      for (int s = 0; s < 3; ++s)
        std::cout << ' ' << synth::kSplitNames[s] << '=' << m.splits[s].count << " ("
                  << m.splits[s].stereo << " two-view)";
      std::cout << ", resampled " << m.resampled << '\n';
    } else if (train->parsed()) {
      auto cfg = harness::TrainConfig::load(train_config);
      const std::filesystem::path data = train_data.empty() ? cfg.data : std::filesystem::path(train_data);
      if (data.empty()) {
        std::cerr << "train: no dataset given (--data or 'data' in the config)\n";
        return kExitUsage;
      }
      const std::filesystem::path metrics_path =
          train_metrics.empty() ? train_out + ".metrics.tsv" : train_metrics;
      auto metrics = open_out(metrics_path);
      const auto model =
          harness::train_from_dataset(cfg, data, &metrics, train_quiet ? nullptr : &std::cerr);
      open_out(train_out, true).close();
      harness::save_model(train_out, model);
      std::cout << "wrote " << train_out << " after " << model.steps << " steps\n";
    } else if (eval->parsed()) {
      const auto model = harness::load_model(eval_ckpt);
      const auto report = harness::evaluate_dataset(model, eval_data, synth::parse_split(eval_split));
      open_out(eval_report) << harness::report_to_json(report);
      harness::write_table(std::cout, report);
    } else if (inf->parsed()) {
      const auto model = harness::load_model(inf_ckpt);
      const auto rig = geometry::load_rig(inf_rig);
      const auto left = load_view(inf_left, inf_left_box);
      const auto right = load_view(inf_right, inf_right_box);
      if (!left && !right) {
        std::cerr << "infer: give --left and/or --right\n";
        return kExitUsage;
      }
      const auto result = harness::infer(model, rig, left, right);
      std::cout << harness::prediction_to_json(result);
      if (!inf_obj.empty())
        hand::save_obj(inf_obj, result.prediction.mano_vertices, model.net->hand_template().faces);
    } else if (plot->parsed()) {
      if (plot_report.empty() && plot_log.empty()) {
        std::cerr << "plot: give --report and/or --log\n";
        return kExitUsage;
      }
      std::filesystem::create_directories(plot_out);
      if (!plot_report.empty()) {
        const auto report = harness::report_from_json(slurp(plot_report));
        std::ostringstream table;
        harness::write_pck_table(table, report);
        open_out(std::filesystem::path(plot_out) / "pck.tsv") << table.str();
      }
      if (!plot_log.empty()) {
        std::ifstream log(plot_log);
        HANDREG_THROW_IF(!log, ErrorCode::Io, "cannot open " + plot_log);
        std::ostringstream table;
        harness::write_loss_table(log, table);
        open_out(std::filesystem::path(plot_out) / "loss.tsv") << table.str();
      }
    } else if (exp->parsed()) {
      const auto corpus = harness::open_corpus(exp_data);
      const auto records = corpus.load(synth::parse_split(exp_split));
      std::filesystem::create_directories(exp_out);
      for (int i = 0; i < exp_count && i < static_cast<int>(records.size()); ++i) {
        for (int v = 0; v < 2; ++v) {
          const auto& view = records[i].views[v];
          if (!view.visible) continue;
          synth::GrayImage img = view.crop;
          img.comments = {harness::box_comment(view.crop_box)};
          const auto name = std::to_string(records[i].id) + (v == 0 ? "_left.pgm" : "_right.pgm");
          synth::save_pgm(std::filesystem::path(exp_out) / name, img);
        }
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
