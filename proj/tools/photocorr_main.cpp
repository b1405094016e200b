#include <charconv>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "photocorr/analysis.hpp"
#include "photocorr/config.hpp"
#include "photocorr/correlator.hpp"
#include "photocorr/fitting.hpp"
#include "photocorr/pipeline.hpp"
#include "photocorr/timetag.hpp"

namespace fs = std::filesystem;
using namespace photocorr;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig config_from(const std::string& path) {
  return path.empty() ? RunConfig{} : load_config(path);
}

// Simulation output: PTAG1 streamed to disk, or CSV collected in memory.
template <typename Run>
RunSummary simulate_to(const std::string& out_a, const std::string& out_b, Run&& run) {
  const bool csv = format_from_path(out_a) == TagFormat::csv ||
                   format_from_path(out_b) == TagFormat::csv;
  if (!csv) {
    FileSink sink(out_a, out_b);
    return run(sink);
  }
  CollectSink sink;
  const RunSummary s = run(sink);
  auto [a, b] = sink.take();
  write_tag_file(a, out_a, format_from_path(out_a));
  write_tag_file(b, out_b, format_from_path(out_b));
  return s;
}

void report(const RunSummary& s) {
  std::cout << "pulses=" << s.n_pulses << " photons=" << s.n_photons << " tags_a=" << s.n_a
            << " tags_b=" << s.n_b << " duration_ps=" << s.duration_ps << '\n';
}

std::vector<double> parse_windows(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto comma = std::min(text.find(',', pos), text.size());
    std::string item = text.substr(pos, comma - pos);
    item.erase(0, item.find_first_not_of(' '));
    item.erase(item.find_last_not_of(' ') + 1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || !(v > 0.0)) {
      throw UsageError("malformed window list: '" + text + "'");
    }
    out.push_back(v);
    pos = comma + 1;
  }
  return out;
}

void emit_fit(const FitResult& r, const std::string& out) {
  if (!out.empty()) write_fit_json(r, out);
  std::cout << to_json(r).dump(2) << '\n';
  if (!r.converged) std::cerr << "warning: fit did not converge\n";
}

template <typename F>
void write_model(const std::string& path, const CorrelationHistogram& h, F&& model) {
  if (path.empty()) return;
  std::vector<double> centres(h.counts.size());
  for (std::size_t i = 0; i < centres.size(); ++i) centres[i] = h.spec.bin_center_ps(i);
  write_model_csv(path, centres, model);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pulsed single-photon source simulation and correlation analysis"};
  app.require_subcommand(1);

  // simulate-hbt / simulate-hom / simulate-decay
  std::string params_path;
  std::int64_t pulses = 0;
  std::uint64_t seed = 0;
  std::string out_a;
  std::string out_b;
  std::string polarization = "co";
  std::optional<double> decay_jitter;

  const auto add_sim_flags = [&](CLI::App* cmd) {
    cmd->add_option("--params", params_path, "Flat key = value config file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--pulses", pulses, "Number of excitation pulses")
        ->required()
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", seed, "RNG seed")->required();
    cmd->add_option("--out-a", out_a, "Tag file for stream a")->required();
    cmd->add_option("--out-b", out_b, "Tag file for stream b")->required();
  };
  auto* sim_hbt = app.add_subcommand("simulate-hbt", "Emitter into an HBT splitter");
  add_sim_flags(sim_hbt);
  auto* sim_hom = app.add_subcommand("simulate-hom", "Emitter into an unbalanced HOM interferometer");
  add_sim_flags(sim_hom);
  sim_hom->add_option("--polarization", polarization, "co or cross")
      ->check(CLI::IsMember({"co", "cross"}));
  auto* sim_decay =
      app.add_subcommand("simulate-decay", "Laser sync (a) and one detector on the emitter (b)");
  add_sim_flags(sim_decay);
  sim_decay->add_option("--jitter-fwhm-ps", decay_jitter,
                        "Detector jitter; defaults to det0.jitter_fwhm_ps");

  // correlate
  std::string in_a;
  std::string in_b;
  std::int64_t bin_ps = 0;
  std::int64_t range_ps = 0;
  std::string out;
  unsigned threads = 1;
  bool start_stop = false;
  auto* corr = app.add_subcommand("correlate", "Histogram of t_b - t_a over [-range, range)");
  corr->add_option("--a", in_a, "Start stream")->required()->check(CLI::ExistingFile);
  corr->add_option("--b", in_b, "Stop stream")->required()->check(CLI::ExistingFile);
  corr->add_option("--bin-ps", bin_ps, "Bin width")->required()->check(CLI::PositiveNumber);
  corr->add_option("--range-ps", range_ps, "Half range")->required()->check(CLI::PositiveNumber);
  corr->add_option("--out", out, "Histogram CSV")->required();
  corr->add_option("--threads", threads, "Worker threads")->check(CLI::Range(1u, 256u));
  corr->add_flag("--start-stop", start_stop, "Count only the first stop per start");

  // fits
  std::string hist_path;
  double t_rep_ps = 12'500.0;
  double irf_fwhm_ps = kSystemIrfFwhmPs;
  std::string model_out;
  std::optional<double> range_min;
  std::optional<double> range_max;
  std::optional<double> fixed_tau1;
  const auto add_fit_flags = [&](CLI::App* cmd) {
    cmd->add_option("--hist", hist_path, "Histogram CSV")->required();
    cmd->add_option("--trep-ps", t_rep_ps, "Repetition period");
    cmd->add_option("--irf-fwhm-ps", irf_fwhm_ps, "IRF width");
    cmd->add_option("--out", out, "FitResult JSON");
    cmd->add_option("--model-out", model_out, "Fitted model at bin centres (CSV)");
  };
  auto* fit_g2 = app.add_subcommand("fit-g2", "Fit the pulsed autocorrelation model");
  add_fit_flags(fit_g2);
  auto* fit_life = app.add_subcommand("fit-lifetime", "Fit an IRF-convolved exponential decay");
  add_fit_flags(fit_life);
  fit_life->add_option("--range-min-ps", range_min, "Fit range start");
  fit_life->add_option("--range-max-ps", range_max, "Fit range end");
  bool periodic = false;
  fit_life->add_flag("--periodic", periodic, "Include tails of earlier pulses (uses --trep-ps)");
  auto* fit_hom_cmd = app.add_subcommand("fit-hom", "Fit the co-polarized HOM model");
  add_fit_flags(fit_hom_cmd);
  fit_hom_cmd->add_option("--fix-tau1-ps", fixed_tau1, "Hold the lifetime fixed");

  // visibility-sweep
  std::string co_path;
  std::string cross_path;
  std::string windows_text;
  auto* sweep = app.add_subcommand("visibility-sweep", "Visibility against window width");
  sweep->add_option("--co", co_path, "Co-polarized histogram CSV")->required();
  sweep->add_option("--cross", cross_path, "Cross-polarized histogram CSV")->required();
  sweep->add_option("--windows-ps", windows_text, "Comma-separated window widths")->required();
  sweep->add_option("--trep-ps", t_rep_ps, "Repetition period");
  sweep->add_option("--out", out, "Sweep CSV")->required();

  // efficiency
  double detected_hz = 0.0;
  double setup_eff = 0.0;
  double det_eff = 0.0;
  double rep_hz = 0.0;
  auto* eff = app.add_subcommand("efficiency", "Photon rate and efficiency at the first lens");
  eff->add_option("--detected-hz", detected_hz, "Detected count rate")->required();
  eff->add_option("--setup-eff", setup_eff, "Setup transmission")->required();
  eff->add_option("--det-eff", det_eff, "Detector efficiency")->required();
  eff->add_option("--rep-hz", rep_hz, "Laser repetition rate")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sim_hbt) {
      const RunConfig cfg = config_from(params_path);
      report(simulate_to(out_a, out_b, [&](TagSink& sink) {
        return run_hbt(cfg.emitter, cfg.hbt, pulses, seed, sink);
      }));
    } else if (*sim_hom) {
      RunConfig cfg = config_from(params_path);
      cfg.hom.polarization = polarization == "co" ? Polarization::co : Polarization::cross;
      report(simulate_to(out_a, out_b, [&](TagSink& sink) {
        return run_hom(cfg.emitter, cfg.hom, pulses, seed, sink);
      }));
    } else if (*sim_decay) {
      const RunConfig cfg = config_from(params_path);
      DetectorParams det = cfg.hbt.det0;
      if (decay_jitter) det.jitter_fwhm_ps = *decay_jitter;
      report(simulate_to(out_a, out_b, [&](TagSink& sink) {
        return run_decay(cfg.emitter, det, pulses, seed, sink);
      }));
    } else if (*corr) {
      const TagStream a = read_tag_file(in_a, format_from_path(in_a));
      const TagStream b = read_tag_file(in_b, format_from_path(in_b));
      const auto spec = HistogramSpec::symmetric(bin_ps, range_ps);
      const CorrelationHistogram h =
          start_stop ? correlate_start_stop(a, b, spec) : correlate(a, b, spec, threads);
      write_histogram_csv(h, out);
      std::cout << "n_a=" << h.n_a << " n_b=" << h.n_b << " pairs=" << h.total_pairs << '\n';
    } else if (*fit_g2) {
      const CorrelationHistogram h = read_histogram_csv(hist_path);
      const FitResult r = fit_hbt(h, t_rep_ps, irf_fwhm_ps);
      HbtModelParams m{r.parameters.at("amplitude"), r.parameters.at("g2_zero"),
                       r.parameters.at("tau1_ps"), t_rep_ps, 8, irf_fwhm_ps};
      write_model(model_out, h, [&](double t) { return hbt_model(t, m); });
      emit_fit(r, out);
    } else if (*fit_life) {
      const CorrelationHistogram h = read_histogram_csv(hist_path);
      std::optional<FitRange> range;
      if (range_min || range_max) {
        range = FitRange{range_min.value_or(static_cast<double>(h.spec.delay_min_ps())),
                         range_max.value_or(static_cast<double>(h.spec.delay_max_ps()))};
      }
      const double period = periodic ? t_rep_ps : 0.0;
      const FitResult r = fit_lifetime(h, irf_fwhm_ps, range, period);
      if (!model_out.empty()) {
        const auto values = lifetime_expected(h.spec, r.parameters.at("amplitude"),
                                              r.parameters.at("tau_ps"), r.parameters.at("t0_ps"),
                                              r.parameters.at("baseline"), irf_fwhm_ps, period);
        std::size_t i = 0;
        write_model(model_out, h, [&](double) { return values[i++]; });
      }
      emit_fit(r, out);
    } else if (*fit_hom_cmd) {
      const CorrelationHistogram h = read_histogram_csv(hist_path);
      const FitResult r = fit_hom(h, t_rep_ps, irf_fwhm_ps, fixed_tau1);
      const double tau1 = fixed_tau1 ? *fixed_tau1 : r.parameters.at("tau1_ps");
      HomModelParams m{r.parameters.at("amplitude"), tau1, t_rep_ps,
                       r.parameters.at("dip_contrast"), r.parameters.at("tau_dip_ps"),
                       irf_fwhm_ps};
      write_model(model_out, h, [&](double t) { return hom_co_model(t, m); });
      emit_fit(r, out);
    } else if (*sweep) {
      const std::vector<double> windows = parse_windows(windows_text);
      const CorrelationHistogram co = read_histogram_csv(co_path);
      const CorrelationHistogram cross = read_histogram_csv(cross_path);
      const auto entries = postselection_sweep(co, cross, windows, t_rep_ps);
      write_sweep_csv(entries, out);
      for (const auto& e : entries) {
        if (e.result) {
          std::cout << "W=" << e.window_ps << " V=" << e.result->visibility << " +- "
                    << e.result->visibility_err << " retained=" << e.result->retained_fraction
                    << '\n';
        } else {
          std::cerr << "W=" << e.window_ps << " error: " << e.error << '\n';
        }
      }
    } else if (*eff) {
      const EfficiencyChain c = efficiency_chain(detected_hz, setup_eff, det_eff, rep_hz);
      nlohmann::json j{{"detected_rate_hz", c.detected_rate_hz},
                       {"setup_efficiency", c.setup_efficiency},
                       {"detector_efficiency", c.detector_efficiency},
                       {"rep_rate_hz", c.rep_rate_hz},
                       {"first_lens_rate_hz", c.first_lens_rate_hz},
                       {"first_lens_efficiency", c.first_lens_efficiency}};
      std::cout << j.dump(2) << '\n';
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitData;
  }
  return kExitOk;
}
