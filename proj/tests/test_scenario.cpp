#include "powifi/scenario.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace powifi;
namespace ps = powifi::scenario;
namespace fs = std::filesystem;

namespace {

ps::Scenario parse(const std::string& text) {
  std::istringstream in(text);
  return ps::parse_scenario(in);
}

std::string error_of(const std::string& text) {
  try {
    parse(text);
  } catch (const ps::ConfigError& e) {
    return e.what();
  }
  return "";
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* kMinimal =
    "seed = 3\n"
    "[router]\n"
    "scheme = PoWiFi\n"
    "[harvester h]\n"
    "distance_ft = 10\n";

}  // namespace

TEST(Load, MinimalDefaults) {
  const auto sc = parse(kMinimal);
  EXPECT_EQ(sc.seed, 3u);
  EXPECT_DOUBLE_EQ(sc.duration_s, 60.0);
  EXPECT_EQ(sc.router.scheme.kind, router::SchemeKind::PoWiFi);
  EXPECT_EQ(sc.router.channels, (std::vector<int>{1, 6, 11}));
  EXPECT_DOUBLE_EQ(fcc::effective_eirp(sc.router.plan).value, 36.0);
  ASSERT_EQ(sc.harvesters.size(), 1u);
  EXPECT_NEAR(sc.harvesters[0].distance.feet(), 10.0, 1e-12);
  EXPECT_DOUBLE_EQ(sc.harvesters[0].g_rx.value, 2.0);
  EXPECT_EQ(sc.harvesters[0].preset, "temperature_battery_free");
  const auto cp = sc.router.channel_policies();
  EXPECT_DOUBLE_EQ(cp[0].policy->inter_packet_delay_us, 100.0);
  EXPECT_EQ(cp[0].policy->queue_threshold, 5);
}

TEST(Load, NegativeDistanceNamesKey) {
  const auto msg = error_of("seed = 1\n[harvester h]\ndistance_ft = -1\n");
  EXPECT_NE(msg.find("distance_ft"), std::string::npos) << msg;
  EXPECT_NE(msg.find("line 3"), std::string::npos) << msg;
}

TEST(Load, Errors) {
  EXPECT_NE(error_of("duration_s = 5\n").find("seed"), std::string::npos);
  EXPECT_NE(error_of("seed = 1\n[router]\ncolour = red\n").find("colour"), std::string::npos);
  EXPECT_NE(error_of("seed = 1\n[router]\nscheme = Turbo\n").find("scheme"), std::string::npos);
  EXPECT_NE(error_of("seed = 1\n[station a]\nrate_mbps = 7\n").find("rate_mbps"), std::string::npos);
  EXPECT_NE(error_of("seed = 1\n[station a]\n[station a]\n").find("duplicate"), std::string::npos);
  EXPECT_NE(error_of("seed = 1\n[station a]\nrole = client\nchannel = 6\n").find("internet channel"),
            std::string::npos);
  EXPECT_NE(error_of("seed = 1\n[router]\ninter_packet_delay_us = 0\n").find("inter_packet_delay_us"),
            std::string::npos);
  EXPECT_NE(error_of("seed = 1\n[router]\nscheme = PoWiFi\nscheme = Baseline\n").find("line 4"), std::string::npos);
  EXPECT_NE(error_of("seed = 1\n[bogus]\n").find("bogus"), std::string::npos);
  EXPECT_NE(error_of("seed = 1\njunk\n").find("line 2"), std::string::npos);
  EXPECT_NE(error_of("seed = 1\n[harvester h]\nwall = granite\n").find("wall"), std::string::npos);
}

TEST(Load, OverridesSurviveScheme) {
  const auto sc = parse("seed = 1\n[router]\nscheme = PoWiFiSlow\ninter_packet_delay_us = 250\n");
  EXPECT_DOUBLE_EQ(sc.router.channel_policies()[0].policy->inter_packet_delay_us, 250.0);
}

TEST(Load, BundledFixturesParse) {
  for (const auto& e : fs::directory_iterator(POWIFI_SCENARIO_DIR)) {
    if (e.path().extension() != ".cfg") continue;
    EXPECT_NO_THROW(ps::load_scenario(e.path())) << e.path();
  }
}

TEST(Load, TempSensorFixture) {
  const auto sc = ps::load_scenario(fs::path(POWIFI_SCENARIO_DIR) / "temp_sensor_range.cfg");
  EXPECT_EQ(sc.router.scheme.kind, router::SchemeKind::PoWiFi);
  EXPECT_DOUBLE_EQ(fcc::effective_eirp(sc.router.plan).value, 36.0);
  ASSERT_EQ(sc.harvesters.size(), 1u);
  EXPECT_DOUBLE_EQ(sc.harvesters[0].g_rx.value, 2.0);
  EXPECT_EQ(sc.harvesters[0].cfg.curve.sensitivity.value, -17.8);
}

TEST(Run, AsusBaselineNeverBoots) {
  auto sc = ps::load_scenario(fs::path(POWIFI_SCENARIO_DIR) / "asus_baseline.cfg");
  const auto rep = ps::run(sc);
  ASSERT_EQ(rep.harvesters.size(), 1u);
  EXPECT_DOUBLE_EQ(rep.harvesters[0].duration_s, 86400.0);
  EXPECT_EQ(rep.harvesters[0].state.boots, 0u);
  EXPECT_NEAR(rep.harvesters[0].rx_dbm[1], -20.8, 0.05);
}

TEST(Run, PoWiFiNoClientsMatchesCycleAccounting) {
  auto sc = parse(kMinimal);
  sc.duration_s = 5.0;
  const auto rep = ps::run(sc);
  const mac::MacParams p;
  const double payload = 12000.0 / 54.0;
  const double cycle = payload + (p.phy_overhead + p.difs) / 1e3 + p.cw_min / 2.0 * p.slot / 1e3;
  for (double o : rep.occupancy_mean) EXPECT_NEAR(o, payload / cycle, 0.02);
  for (const auto& row : rep.occupancy)
    for (double o : row.per_channel) {
      EXPECT_GE(o, 0.0);
      EXPECT_LE(o, 1.0);
    }
  EXPECT_EQ(rep.occupancy.size(), 10u);
}

TEST(Run, SeriesLengthsMatchDuration) {
  auto sc = parse(std::string(kMinimal) + "[station c]\ntraffic = udp_cbr\ntarget_mbps = 5\n");
  sc.duration_s = 2.25;
  const auto rep = ps::run(sc);
  EXPECT_EQ(rep.occupancy.size(), 5u);
  for (const auto& s : rep.throughput) EXPECT_EQ(s.mbps.size(), 5u);
  const auto* c = rep.series("router/client_data/ch1");
  ASSERT_NE(c, nullptr);
}

TEST(Run, DeterministicOutputs) {
  auto sc = parse(std::string(kMinimal) + "[station c]\ntraffic = backlogged\n");
  sc.duration_s = 2.0;
  const auto dir = fs::temp_directory_path() / "powifi_det";
  fs::remove_all(dir);
  ps::write_reports(dir / "a", ps::run(sc));
  ps::write_reports(dir / "b", ps::run(sc));
  sc.seed += 1;
  ps::write_reports(dir / "c", ps::run(sc));
  for (const char* f : {"occupancy.csv", "throughput.csv", "harvester.csv", "summary.txt", "trace.csv"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
  EXPECT_NE(slurp(dir / "a" / "trace.csv"), slurp(dir / "c" / "trace.csv"));
  fs::remove_all(dir);
}

TEST(Run, ExportedTraceReproducesOccupancy) {
  auto sc = parse(std::string(kMinimal) +
                  "[station c]\ntraffic = udp_cbr\ntarget_mbps = 8\n"
                  "[station n]\nrole = neighbor_ap\nchannel = 6\nrate_mbps = 24\ntraffic = backlogged\n");
  sc.duration_s = 3.0;
  const auto rep = ps::run(sc);
  std::stringstream ss;
  mac::write_trace(ss, rep.mac.traces);
  const auto an = ps::analyze_trace(ss, std::nullopt, std::string("router"));
  ASSERT_EQ(an.per_channel.size(), 3u);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(an.per_channel[i].second, rep.occupancy_mean[i], 1e-6);
  EXPECT_NEAR(an.cumulative, rep.cumulative_mean, 1e-6);
}

TEST(Analyze, SyntheticTraces) {
  std::istringstream one("# duration_us=1000000\n0,1,ap,client_data,1500,54,delivered\n");
  const auto r = ps::analyze_trace(one);
  ASSERT_EQ(r.per_channel.size(), 1u);
  EXPECT_NEAR(r.per_channel[0].second, 0.000222, 1e-6);

  std::istringstream three(
      "# duration_us=100000\n"
      "0,1,ap,power_broadcast,1500,54,delivered\n"
      "500,6,ap,power_broadcast,1500,24,delivered\n"
      "900,11,ap,beacon,300,1,delivered\n"
      "1200,1,ap,power_broadcast,1500,54,collided\n");
  const auto t = ps::analyze_trace(three);
  double sum = 0.0;
  for (const auto& [ch, o] : t.per_channel) sum += o;
  EXPECT_NEAR(t.cumulative, sum, 1e-15);
  EXPECT_NEAR(t.per_channel[0].second, 2 * 222.2222222 / 1e5, 1e-9);

  std::istringstream bad("0,1,ap,client_data,1500,54,delivered\n5,1,ap,client_data,1500,53,delivered\n");
  try {
    ps::analyze_trace(bad);
    FAIL();
  } catch (const mac::TraceFormatError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
}

TEST(Sweep, DistanceMonotone) {
  auto sc = ps::load_scenario(fs::path(POWIFI_SCENARIO_DIR) / "temp_sensor_range.cfg");
  sc.duration_s = 2.0;
  std::vector<std::string> values;
  for (int ft = 2; ft <= 30; ft += 2) values.push_back(std::to_string(ft));
  const auto rows = ps::sweep(sc, {ps::SweepVariable::distance, values, 1});
  ASSERT_EQ(rows.size(), values.size());
  double prev = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(rows[i].value, values[i]);
    const double r = rows[i].mean("harvester.temp.update_rate_hz");
    EXPECT_LE(r, prev);
    prev = r;
    if (std::stod(values[i]) >= 22.0) {
      EXPECT_EQ(r, 0.0) << values[i];
    }
    if (std::stod(values[i]) <= 18.0) {
      EXPECT_GT(r, 0.0) << values[i];
    }
  }
}

TEST(Sweep, DelayKneeNearPayloadAirtime) {
  auto sc = parse(kMinimal);
  sc.duration_s = 3.0;
  sc.harvesters.clear();
  const std::vector<std::string> delays{"25", "100", "200", "400", "600", "800"};
  const auto rows = ps::sweep(sc, {ps::SweepVariable::inter_packet_delay, delays, 1});
  std::vector<double> occ;
  for (const auto& r : rows) occ.push_back(r.mean("occupancy_ch6_mean"));
  // Flat while the source outruns the channel, then airtime / delay.
  EXPECT_NEAR(occ[0], occ[1], 0.02);
  EXPECT_NEAR(occ[1], occ[2], 0.02);
  for (std::size_t i = 3; i < occ.size(); ++i) {
    EXPECT_LT(occ[i], occ[i - 1]);
    EXPECT_NEAR(occ[i], 222.2222 / std::stod(delays[i]), 0.03);
  }
}

TEST(Sweep, WallOrderingForCamera) {
  auto sc = parse(
      "seed = 2\nduration_s = 2\nharvester_duration_s = 172800\n"
      "[harvester cam]\npreset = camera_battery_free\ndistance_ft = 5\n");
  const std::vector<std::string> walls{"double_pane_glass", "wooden_door", "hollow_wall", "double_sheetrock"};
  const auto rows = ps::sweep(sc, {ps::SweepVariable::wall_material, walls, 1});
  double prev = 0.0;
  for (const auto& r : rows) {
    const double t = r.mean("harvester.cam.mean_inter_event_s");
    EXPECT_TRUE(std::isfinite(t)) << r.value;
    EXPECT_GT(t, prev) << r.value;
    prev = t;
  }
}

TEST(Sweep, Errors) {
  const auto sc = parse(kMinimal);
  EXPECT_THROW(ps::sweep(sc, {ps::SweepVariable::distance, {}, 1}), ps::ConfigError);
  EXPECT_THROW(ps::sweep(sc, {ps::SweepVariable::distance, {"abc"}, 1}), ps::ConfigError);
  EXPECT_THROW(ps::sweep(sc, {ps::SweepVariable::udp_target_rate, {"5"}, 1}), ps::ConfigError);
  EXPECT_FALSE(ps::parse_sweep_variable("colour"));
}

TEST(Cli, ExitCodes) {
  const std::string cli = POWIFI_CLI;
  const auto dir = fs::temp_directory_path() / "powifi_cli";
  fs::create_directories(dir);
  {
    std::ofstream(dir / "bad.cfg") << "seed = 1\n[harvester h]\ndistance_ft = -1\n";
    std::ofstream(dir / "ok.cfg") << kMinimal;
    std::ofstream(dir / "bad.trace") << "0,1,ap,client_data,1500,7,delivered\n";
  }
  auto rc = [&](const std::string& args) {
    const int raw = std::system((cli + " " + args + " > /dev/null 2>&1").c_str());
    return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  };
  EXPECT_EQ(rc("run " + (dir / "ok.cfg").string() + " --duration 0.5 --out-dir " + (dir / "out").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "summary.txt"));
  EXPECT_EQ(rc("run " + (dir / "bad.cfg").string()), 2);
  EXPECT_EQ(rc("run " + (dir / "missing.cfg").string()), 2);
  EXPECT_EQ(rc("sweep " + (dir / "ok.cfg").string() + " --var colour --values 1"), 2);
  EXPECT_EQ(rc("fcc --n-ant 3 --gain-dbi 6 --tx-dbm 30 --correlated"), 0);
  EXPECT_EQ(rc("fcc --n-ant 0"), 2);
  EXPECT_EQ(rc("analyze " + (dir / "out" / "trace.csv").string()), 0);
  EXPECT_EQ(rc("analyze " + (dir / "bad.trace").string()), 3);
  EXPECT_EQ(rc("analyze " + (dir / "nope.trace").string()), 3);
  fs::remove_all(dir);
}
