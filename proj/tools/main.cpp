// aiscast — vessel-trajectory ingestion, training and forecasting toolkit.
//
//   aiscast [--config FILE] [--print-config] SUBCOMMAND [flags]
//
// Subcommands: preprocess, synth, train, predict, evaluate,
// inspect-attention. Settings come from an optional `key = value` file
// (see --print-config for the full key set); command-line flags override
// individual values only when explicitly passed. All outputs are
// deterministic for fixed inputs, settings and seeds.

#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "aiscast/ais.hpp"
#include "aiscast/checkpoint.hpp"
#include "aiscast/config.hpp"
#include "aiscast/eval.hpp"
#include "aiscast/forecast.hpp"
#include "aiscast/io.hpp"
#include "aiscast/synth.hpp"
#include "aiscast/training.hpp"

namespace {

using namespace aiscast;

// "out.csv" tagged "cv" -> "out.cv.csv"; extensionless paths get ".cv".
std::string with_tag(const std::string& path, const std::string& tag) {
  const std::size_t slash = path.find_last_of('/');
  const std::size_t dot = path.find_last_of('.');
  if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
    return path + "." + tag;
  return path.substr(0, dot) + "." + tag + path.substr(dot);
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream os(path, mode);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  return os;
}

void print_report(std::ostream& os, const std::string& label, const EvalReport& r) {
  os << "== " << label << " ==\n";
  os << "windows: " << r.n_windows << " evaluated, " << r.n_skipped << " skipped\n";
  for (std::size_t i = 0; i < r.horizon_steps.size(); ++i) {
    os << "horizon " << r.horizon_steps[i] << " steps (" << format_double(r.horizon_hours[i])
       << " h): mean " << format_double(r.mean_nmi[i]) << " nmi, median "
       << format_double(r.median_nmi[i]) << " nmi\n";
  }
  if (r.crossed)
    os << "mean error reaches " << format_double(r.threshold_nmi) << " nmi at "
       << format_double(r.crossing_hours) << " h\n";
  else
    os << "mean error stays below " << format_double(r.threshold_nmi)
       << " nmi over the evaluated horizons\n";
}

int run_preprocess(const AppConfig& cfg, const std::string& input, const std::string& output,
                   const std::string& coastline) {
  const auto parsed = parse_csv_file(input, cfg.csv);
  std::vector<Polyline> coast;
  if (!coastline.empty()) coast = load_polylines_file(coastline);
  const auto res = run_pipeline(parsed.messages, cfg.pipeline, cfg.disc, coast);
  write_windows_file(output, res.windows);
  const auto& st = res.stats;
  std::cout << "rows: " << parsed.stats.rows_total << " read, " << parsed.stats.rows_dropped
            << " malformed\n"
            << "removed: " << st.clean.removed_sog << " fast, " << st.clean.removed_outside_roi
            << " outside region, " << st.clean.removed_moored << " moored, "
            << st.coastline_removed << " near shore\n"
            << "tracks: " << st.tracks_assembled << " assembled, " << st.tracks_kept
            << " kept (" << st.track_filter.dropped_short << " short, "
            << st.track_filter.dropped_moored << " idle, " << st.track_filter.removed_speed_jumps
            << " speed-jump messages cut)\n"
            << "windows written: " << st.windows << " -> " << output << "\n";
  return 0;
}

int run_synth(const AppConfig& cfg, const std::string& out_train, const std::string& out_test) {
  const auto data = generate_synthetic(cfg.synth, cfg.disc);
  write_windows_file(out_train, data.train);
  write_windows_file(out_test, data.test);
  const auto count_b = [](const std::vector<bool>& v) {
    std::size_t n = 0;
    for (bool b : v) n += b;
    return n;
  };
  std::cout << "train windows: " << data.train.size() << " (" << count_b(data.train_branch_b)
            << " on the turning branch) -> " << out_train << "\n"
            << "test windows: " << data.test.size() << " (" << count_b(data.test_branch_b)
            << " on the turning branch) -> " << out_test << "\n";
  return 0;
}

int run_train(const AppConfig& cfg, const std::string& data, const std::string& out,
              const std::string& resume, const std::string& trace_path,
              const std::function<void(TrainConfig&)>& apply_overrides) {
  const auto windows = read_windows_file(data);

  ModelConfig mcfg = cfg.model;
  DiscretizationConfig disc = cfg.disc;
  TrainConfig tcfg = cfg.train;
  std::int64_t start_step = 0;

  ModelParams<float> params;
  LoadedCheckpoint lc;
  if (!resume.empty()) {
    lc = load_checkpoint(resume);
    // The checkpoint is authoritative for the architecture, the grid and the
    // training recipe; explicit flags can still extend or adjust the run.
    mcfg = lc.meta.model;
    disc = lc.meta.disc;
    tcfg = lc.meta.train;
    start_step = lc.meta.step;
    params = std::move(lc.params);
    std::cout << "resuming from " << resume << " at step " << start_step << "\n";
  } else {
    Rng init_rng(cfg.train.seed);
    params = ModelParams<float>::init(mcfg, bin_counts(disc), init_rng);
  }
  apply_overrides(tcfg);
  mcfg.validate();
  disc.validate();
  tcfg.validate();

  AdamW<float> opt(params.named(), tcfg);
  if (!resume.empty()) restore_optimizer(opt, lc);

  std::ofstream trace;
  if (!trace_path.empty()) {
    trace = open_out(trace_path, start_step > 0 ? std::ios::app : std::ios::out);
  }

  const auto snapshot = [&](std::int64_t step) {
    CheckpointMeta meta{mcfg, disc, tcfg, step};
    save_checkpoint(out, params, meta, &opt);
  };
  const auto res = train_model(params, opt, mcfg, disc, tcfg, windows, start_step,
                               trace_path.empty() ? nullptr : &trace, snapshot);
  snapshot(opt.step_count());

  std::cout << "steps run: " << res.steps_done << " (now at step " << opt.step_count() << ")\n";
  if (mcfg.loss == LossMode::mse) {
    std::cout << "final loss: " << format_double(res.final_total) << "\n";
  } else {
    std::cout << "final loss: " << format_double(res.final_total) << " (fine "
              << format_double(res.final_fine_ce) << ", coarse "
              << format_double(res.final_coarse_ce) << ")\n";
  }
  std::cout << "checkpoint written: " << out << "\n";
  return 0;
}

int run_predict(const std::string& ckpt, const std::string& data, const std::string& out,
                int context_steps, const RolloutConfig& rc) {
  auto lc = load_checkpoint(ckpt);
  const auto windows = read_windows_file(data);
  if (context_steps < 1) throw std::invalid_argument("context steps must be >= 1");
  rc.validate();

  std::vector<ForecastRecord> records;
  std::size_t skipped = 0;
  for (const auto& w : windows) {
    if (static_cast<int>(w.points.size()) < context_steps) {
      ++skipped;
      continue;
    }
    const std::vector<ContinuousObs> context(w.points.begin(), w.points.begin() + context_steps);
    RolloutConfig rcw = rc;
    rcw.seed = detail::window_seed(rc.seed, w);
    const auto samples = rollout(lc.params, lc.meta.model, lc.meta.disc, context, rcw);
    for (std::size_t s = 0; s < samples.size(); ++s) {
      ForecastRecord fr;
      fr.mmsi = w.mmsi;
      fr.t0 = w.t0 + static_cast<std::int64_t>(context_steps) * w.period_s;
      fr.period_s = w.period_s;
      fr.sample = static_cast<int>(s);
      fr.clamped = samples[s].clamped;
      fr.points = samples[s].points;
      records.push_back(std::move(fr));
    }
  }
  if (records.empty())
    throw std::runtime_error("no window has the " + std::to_string(context_steps) +
                             " context steps required");
  write_forecasts_file(out, records);
  std::cout << "forecasts written: " << records.size() << " (" << rc.n_samples
            << " per window, " << skipped << " windows skipped) -> " << out << "\n";
  return 0;
}

int run_evaluate(const std::vector<std::string>& ckpts, const std::string& data,
                 const std::string& curve, const std::string& report, bool with_cv,
                 const EvalConfig& ec) {
  const auto windows = read_windows_file(data);
  ec.validate();

  std::vector<std::pair<std::string, EvalReport>> rows;
  for (const auto& path : ckpts) {
    auto lc = load_checkpoint(path);
    rows.emplace_back(path, evaluate_model(lc.params, lc.meta.model, lc.meta.disc, windows, ec));
  }
  if (with_cv) rows.emplace_back("constant-velocity", evaluate_constant_velocity(windows, ec));

  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (i) std::cout << "\n";
    print_report(std::cout, rows[i].first, rows[i].second);
  }

  if (!report.empty()) {
    auto os = open_out(report);
    os << "variant,horizon_steps,horizon_hours,mean_nmi,median_nmi\n";
    for (const auto& [label, r] : rows)
      for (std::size_t i = 0; i < r.horizon_steps.size(); ++i)
        os << label << ',' << r.horizon_steps[i] << ',' << format_double(r.horizon_hours[i])
           << ',' << format_double(r.mean_nmi[i]) << ',' << format_double(r.median_nmi[i])
           << '\n';
    std::cout << "report written: " << report << "\n";
  }

  if (!curve.empty()) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::string path = curve;
      if (rows.size() > 1) {
        const bool is_cv = with_cv && i + 1 == rows.size();
        path = with_tag(curve, is_cv ? "cv" : std::to_string(i));
      }
      auto os = open_out(path);
      write_error_curve_csv(rows[i].second, os);
      std::cout << "curve written: " << path << "\n";
    }
  }
  return 0;
}

int run_inspect(const std::string& ckpt, const std::string& data, const std::string& out,
                int window_idx, int layer, int head, int steps) {
  auto lc = load_checkpoint(ckpt);
  const auto windows = read_windows_file(data);
  if (window_idx < 0 || static_cast<std::size_t>(window_idx) >= windows.size())
    throw std::out_of_range("window index " + std::to_string(window_idx) + " out of range (file has " +
                            std::to_string(windows.size()) + " windows)");
  const auto& w = windows[window_idx];
  const int len = static_cast<int>(w.points.size());
  int K = steps > 0 ? steps : std::min(len, lc.meta.model.max_seqlen);
  if (K > len)
    throw std::invalid_argument("window " + std::to_string(window_idx) + " has only " +
                                std::to_string(len) + " steps");
  if (K > lc.meta.model.max_seqlen)
    throw std::invalid_argument("the model accepts at most " +
                                std::to_string(lc.meta.model.max_seqlen) + " steps");
  const std::vector<ContinuousObs> context(w.points.begin(), w.points.begin() + K);

  AttentionTrace trace;
  if (lc.meta.model.loss == LossMode::mse)
    transformer_forward_regression(lc.params, lc.meta.model, lc.meta.disc, context, &trace);
  else
    transformer_forward(lc.params, lc.meta.model, lc.meta.disc, context, &trace);

  auto os = open_out(out);
  export_attention_csv(trace, layer, head, os);
  std::cout << "attention weights (layer " << layer << ", head " << head << ", " << K << "x" << K
            << ") written: " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vessel-trajectory forecasting toolkit"};
  app.require_subcommand(0, 1);

  std::string config_path;
  app.add_option("--config", config_path, "settings file (key = value lines)");
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the effective settings and exit");

  // --- preprocess ---
  auto* pre = app.add_subcommand("preprocess", "clean an AIS CSV export into forecasting windows");
  pre->fallthrough();
  std::string pre_input, pre_output, pre_coastline;
  pre->add_option("--input", pre_input, "AIS CSV file")->required();
  pre->add_option("--output", pre_output, "window file to write (ndjson)")->required();
  pre->add_option("--coastline", pre_coastline, "coastline polylines (ndjson arrays)");

  // --- synth ---
  auto* syn = app.add_subcommand("synth", "generate the synthetic branching corridor");
  syn->fallthrough();
  std::string syn_train, syn_test;
  syn->add_option("--out-train", syn_train, "training windows to write")->required();
  syn->add_option("--out-test", syn_test, "held-out windows to write")->required();

  // --- train ---
  auto* trn = app.add_subcommand("train", "fit a model on preprocessed windows");
  trn->fallthrough();
  std::string trn_data, trn_out, trn_resume, trn_trace;
  trn->add_option("--data", trn_data, "training windows (ndjson)")->required();
  trn->add_option("--out", trn_out, "checkpoint to write")->required();
  trn->add_option("--resume", trn_resume, "checkpoint to continue from");
  trn->add_option("--trace", trn_trace, "per-step loss trace CSV");
  int trn_epochs = 0, trn_batch = 0;
  double trn_lr = 0.0;
  std::uint64_t trn_seed = 0;
  std::int64_t trn_every = 0;
  trn->add_option("--epochs", trn_epochs, "override train.epochs");
  trn->add_option("--batch-size", trn_batch, "override train.batch_size");
  trn->add_option("--lr-max", trn_lr, "override train.lr_max");
  trn->add_option("--seed", trn_seed, "override train.seed");
  trn->add_option("--checkpoint-every", trn_every, "override train.checkpoint_every");

  // --- predict ---
  auto* prd = app.add_subcommand("predict", "roll stochastic forecasts from each window's start");
  prd->fallthrough();
  std::string prd_ckpt, prd_data, prd_out, prd_mode;
  int prd_horizon = 0, prd_n = 0, prd_context = 0;
  double prd_temp = 0.0;
  std::uint64_t prd_seed = 0;
  prd->add_option("--ckpt", prd_ckpt, "model checkpoint")->required();
  prd->add_option("--data", prd_data, "windows supplying the contexts (ndjson)")->required();
  prd->add_option("--out", prd_out, "forecast file to write (ndjson)")->required();
  prd->add_option("--horizon", prd_horizon, "override forecast.horizon");
  prd->add_option("--n", prd_n, "override forecast.n_samples");
  prd->add_option("--mode", prd_mode, "override forecast.mode (sample|greedy)");
  prd->add_option("--temperature", prd_temp, "override forecast.temperature");
  prd->add_option("--seed", prd_seed, "override forecast.seed");
  prd->add_option("--context-steps", prd_context, "override eval.context_steps");

  // --- evaluate ---
  auto* evl = app.add_subcommand("evaluate", "score checkpoints on held-out windows");
  evl->fallthrough();
  std::vector<std::string> evl_ckpts;
  std::string evl_data, evl_curve, evl_report, evl_mode;
  bool evl_cv = false;
  int evl_n = 0, evl_context = 0;
  double evl_temp = 0.0, evl_thr = 0.0;
  std::uint64_t evl_seed = 0;
  evl->add_option("--ckpt", evl_ckpts, "model checkpoint (repeatable)");
  evl->add_option("--data", evl_data, "held-out windows (ndjson)")->required();
  evl->add_option("--curve", evl_curve, "error-vs-horizon CSV to write");
  evl->add_option("--report", evl_report, "combined per-variant CSV to write");
  evl->add_flag("--cv", evl_cv, "include a constant-velocity dead-reckoning baseline");
  evl->add_option("--n", evl_n, "override eval.n_samples");
  evl->add_option("--mode", evl_mode, "override eval.mode (sample|greedy)");
  evl->add_option("--temperature", evl_temp, "override eval.temperature");
  evl->add_option("--seed", evl_seed, "override eval.seed");
  evl->add_option("--context-steps", evl_context, "override eval.context_steps");
  evl->add_option("--threshold", evl_thr, "override eval.threshold_nmi");

  // --- inspect-attention ---
  auto* ins = app.add_subcommand("inspect-attention", "dump one head's attention matrix as CSV");
  ins->fallthrough();
  std::string ins_ckpt, ins_data, ins_out;
  int ins_window = 0, ins_layer = 0, ins_head = 0, ins_steps = 0;
  ins->add_option("--ckpt", ins_ckpt, "model checkpoint")->required();
  ins->add_option("--data", ins_data, "windows supplying the input sequence (ndjson)")->required();
  ins->add_option("--out", ins_out, "CSV file to write")->required();
  ins->add_option("--window", ins_window, "window index in the file (default 0)");
  ins->add_option("--layer", ins_layer, "transformer layer (default 0)");
  ins->add_option("--head", ins_head, "attention head (default 0)");
  ins->add_option("--steps", ins_steps, "input steps to feed (default: whole window)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    AppConfig cfg;
    if (!config_path.empty()) load_config_file(config_path, cfg);

    if (app.get_subcommands().empty()) {
      if (print_config) {
        std::cout << dump_config(cfg);
        return 0;
      }
      std::cerr << app.help();
      return 1;
    }

    if (pre->parsed()) {
      if (print_config) { std::cout << dump_config(cfg); return 0; }
      return run_preprocess(cfg, pre_input, pre_output, pre_coastline);
    }
    if (syn->parsed()) {
      if (print_config) { std::cout << dump_config(cfg); return 0; }
      return run_synth(cfg, syn_train, syn_test);
    }
    if (trn->parsed()) {
      const auto overrides = [&](TrainConfig& t) {
        if (trn->count("--epochs")) t.epochs = trn_epochs;
        if (trn->count("--batch-size")) t.batch_size = trn_batch;
        if (trn->count("--lr-max")) t.lr_max = trn_lr;
        if (trn->count("--seed")) t.seed = trn_seed;
        if (trn->count("--checkpoint-every")) t.checkpoint_every = trn_every;
      };
      if (print_config) {
        overrides(cfg.train);
        std::cout << dump_config(cfg);
        return 0;
      }
      // A fresh run draws its initial weights from train.seed, so apply the
      // override before initialization as well.
      overrides(cfg.train);
      return run_train(cfg, trn_data, trn_out, trn_resume, trn_trace, overrides);
    }
    if (prd->parsed()) {
      RolloutConfig rc = cfg.forecast;
      if (prd->count("--horizon")) rc.horizon = prd_horizon;
      if (prd->count("--n")) rc.n_samples = prd_n;
      if (prd->count("--mode")) rc.mode = parse_decode_mode(prd_mode);
      if (prd->count("--temperature")) rc.temperature = prd_temp;
      if (prd->count("--seed")) rc.seed = prd_seed;
      int context = cfg.eval.context_steps;
      if (prd->count("--context-steps")) context = prd_context;
      if (print_config) {
        cfg.forecast = rc;
        cfg.eval.context_steps = context;
        std::cout << dump_config(cfg);
        return 0;
      }
      return run_predict(prd_ckpt, prd_data, prd_out, context, rc);
    }
    if (evl->parsed()) {
      EvalConfig ec = cfg.eval;
      if (evl->count("--n")) ec.n_samples = evl_n;
      if (evl->count("--mode")) ec.mode = parse_decode_mode(evl_mode);
      if (evl->count("--temperature")) ec.temperature = evl_temp;
      if (evl->count("--seed")) ec.seed = evl_seed;
      if (evl->count("--context-steps")) ec.context_steps = evl_context;
      if (evl->count("--threshold")) ec.threshold_nmi = evl_thr;
      if (print_config) {
        cfg.eval = ec;
        std::cout << dump_config(cfg);
        return 0;
      }
      if (evl_ckpts.empty() && !evl_cv)
        throw std::runtime_error("evaluate needs at least one --ckpt (or --cv)");
      return run_evaluate(evl_ckpts, evl_data, evl_curve, evl_report, evl_cv, ec);
    }
    if (ins->parsed()) {
      if (print_config) { std::cout << dump_config(cfg); return 0; }
      return run_inspect(ins_ckpt, ins_data, ins_out, ins_window, ins_layer, ins_head,
                         ins_steps);
    }
    std::cerr << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
