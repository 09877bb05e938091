// powifi: run scenarios, sweep one variable, check FCC plans, analyze traces.
//
// Exit codes: 0 success, 2 configuration error, 3 runtime error.

#include "powifi/fcc.hpp"
#include "powifi/scenario.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

namespace ps = powifi::scenario;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

struct Common {
  std::optional<std::uint64_t> seed;
  std::optional<double> duration;
  std::string out_dir = "out";
};

void apply_common(ps::Scenario& sc, const Common& c) {
  if (c.seed) sc.seed = *c.seed;
  if (c.duration) {
    if (!(*c.duration > 0.0)) throw ps::ConfigError("--duration must be positive");
    sc.duration_s = *c.duration;
  }
}

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--seed", c.seed, "Override the scenario seed");
  cmd->add_option("--duration", c.duration, "Override simulated MAC duration (s)");
  cmd->add_option("--out-dir", c.out_dir, "Output directory")->capture_default_str();
}

int cmd_run(const std::string& cfg, const Common& c) {
  auto sc = ps::load_scenario(cfg);
  apply_common(sc, c);
  const auto rep = ps::run(sc);
  ps::write_reports(c.out_dir, rep);
  ps::write_summary(std::cout, rep);
  return 0;
}

int cmd_sweep(const std::string& cfg, const Common& c, const std::string& var, const std::vector<std::string>& values,
              int seeds, unsigned jobs) {
  auto sc = ps::load_scenario(cfg);
  apply_common(sc, c);
  const auto v = ps::parse_sweep_variable(var);
  if (!v) throw ps::ConfigError("unknown sweep variable '" + var + "'");
  const auto rows = ps::sweep(sc, {*v, values, seeds}, jobs);
  std::filesystem::create_directories(c.out_dir);
  std::ofstream f(std::filesystem::path(c.out_dir) / "sweep.csv");
  if (!f) throw std::runtime_error("cannot write sweep.csv");
  ps::write_sweep_csv(f, var, rows);
  ps::write_sweep_csv(std::cout, var, rows);
  return 0;
}

struct FccArgs {
  int n_ant = 1;
  double gain_dbi = 6.0;
  std::optional<double> total_dbm;
  std::optional<double> per_antenna_dbm;
  bool correlated = false;
  double efficiency = 1.0;
  std::optional<double> distance_ft;
  double g_rx_dbi = 2.0;
  int channel = 1;
};

int cmd_fcc(const FccArgs& a) {
  namespace fcc = powifi::fcc;
  fcc::Correlation corr = fcc::Uncorrelated{};
  if (a.correlated) corr = fcc::Correlated{a.efficiency};
  fcc::TxPlan plan;
  try {
    if (a.per_antenna_dbm) {
      plan = fcc::TxPlan::from_per_antenna(a.n_ant, powifi::GainDbi{a.gain_dbi}, corr, powifi::PowerDbm{*a.per_antenna_dbm});
    } else {
      plan = fcc::TxPlan{a.n_ant, powifi::GainDbi{a.gain_dbi}, corr, powifi::PowerDbm{a.total_dbm.value_or(30.0)}};
    }
    plan.validate();
  } catch (const powifi::DomainError& e) {
    throw ps::ConfigError(e.what());
  }
  std::cout << fcc::check_compliance(plan);
  const auto eirp = fcc::effective_eirp(plan);
  std::cout << "effective_eirp_dbm=" << ps::fmt(eirp.value, "%.4f") << '\n';
  if (a.distance_ft) {
    const powifi::rf::LinkGeometry link{powifi::Distance::feet(*a.distance_ft), powifi::rf::channel_center(a.channel),
                                        powifi::rf::WallMaterial::none};
    const auto rx = powifi::rf::received_power(eirp, powifi::GainDbi{a.g_rx_dbi}, link);
    std::cout << "received_dbm=" << ps::fmt(rx.value, "%.4f") << '\n';
  }
  return 0;
}

int cmd_analyze(const std::string& path, std::optional<double> t0, std::optional<double> t1,
                std::optional<std::string> station) {
  std::optional<powifi::mac::Window> w;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace '" + path + "'");
  if (t0 || t1) {
    // Fill the open end from the trace itself.
    std::ifstream probe(path);
    const auto imp = powifi::mac::read_trace(probe);
    w = powifi::mac::Window{t0.value_or(0.0), t1.value_or(imp.declared_duration_us.value_or(imp.last_end_us))};
    if (!(w->t1_us > w->t0_us)) throw ps::ConfigError("analysis window must have t1 > t0");
  }
  const auto rep = ps::analyze_trace(in, w, station);
  std::cout << "window_us=" << ps::fmt(rep.window.t0_us, "%.3f") << ',' << ps::fmt(rep.window.t1_us, "%.3f") << '\n';
  for (const auto& [ch, o] : rep.per_channel) std::cout << "occupancy_ch" << ch << '=' << ps::fmt(o, "%.9f") << '\n';
  std::cout << "cumulative=" << ps::fmt(rep.cumulative, "%.9f") << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Wi-Fi power delivery simulator"};
  app.require_subcommand(1);

  Common common;
  std::string cfg;

  auto* run = app.add_subcommand("run", "Run one scenario");
  run->add_option("config", cfg, "Scenario file")->required();
  add_common(run, common);

  std::string var;
  std::vector<std::string> values;
  int seeds = 1;
  unsigned jobs = 0;
  auto* sweep = app.add_subcommand("sweep", "Sweep one scenario variable");
  sweep->add_option("config", cfg, "Scenario file")->required();
  sweep->add_option("--var", var, "distance|inter_packet_delay|udp_target_rate|neighbor_rate|wall_material|"
                                  "neighbor_load|queue_threshold")
      ->required();
  sweep->add_option("--values", values, "Comma-separated values")->required()->delimiter(',');
  sweep->add_option("--seeds", seeds, "Seeds per value (seed, seed+1, ...)")->capture_default_str();
  sweep->add_option("--jobs", jobs, "Concurrent sweep points (0: hardware threads)");
  add_common(sweep, common);

  FccArgs fa;
  auto* fcc = app.add_subcommand("fcc", "Check a transmit plan against the 2.4 GHz limits");
  fcc->add_option("--n-ant", fa.n_ant, "Number of antennas")->capture_default_str();
  fcc->add_option("--gain-dbi", fa.gain_dbi, "Per-antenna gain (dBi)")->capture_default_str();
  auto* total = fcc->add_option("--tx-dbm", fa.total_dbm, "Total conducted power (dBm)");
  fcc->add_option("--per-antenna-dbm", fa.per_antenna_dbm, "Conducted power per antenna port (dBm)")->excludes(total);
  fcc->add_flag("--correlated", fa.correlated, "Correlated (beamformed) transmission");
  fcc->add_option("--efficiency", fa.efficiency, "Beamforming efficiency in (0,1]")->capture_default_str();
  fcc->add_option("--distance-ft", fa.distance_ft, "Also report received power at this distance");
  fcc->add_option("--g-rx-dbi", fa.g_rx_dbi, "Receive antenna gain (dBi)")->capture_default_str();
  fcc->add_option("--channel", fa.channel, "Channel for the received-power estimate")->capture_default_str();

  std::string trace;
  std::optional<double> t0, t1;
  std::optional<std::string> station;
  auto* analyze = app.add_subcommand("analyze", "Occupancy of a frame trace");
  analyze->add_option("trace", trace, "Trace file")->required();
  analyze->add_option("--t0-us", t0, "Window start (us)");
  analyze->add_option("--t1-us", t1, "Window end (us)");
  analyze->add_option("--station", station, "Count only this station's frames");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) return cmd_run(cfg, common);
    if (*sweep) return cmd_sweep(cfg, common, var, values, seeds, jobs);
    if (*fcc) return cmd_fcc(fa);
    if (*analyze) return cmd_analyze(trace, t0, t1, station);
  } catch (const ps::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const powifi::mac::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
