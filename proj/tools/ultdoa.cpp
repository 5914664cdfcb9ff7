// Batch front-end: simulate, solve, fingerprint, stream, plotdata, broker.
// Exit status: 0 success, 1 usage, 2 data error.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ultdoa/config.hpp"
#include "ultdoa/dataset.hpp"
#include "ultdoa/error.hpp"
#include "ultdoa/fingerprint_io.hpp"
#include "ultdoa/mqtt.hpp"
#include "ultdoa/pipeline.hpp"
#include "ultdoa/stream.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace ultdoa;

namespace {

constexpr int kUsage = 1;
constexpr int kDataError = 2;

std::atomic<bool> g_stop{false};

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot write " + path.string());
  out << text;
  if (!out) throw Error(Errc::IoError, "write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string hex(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

json cdf_json(const std::vector<CdfPoint>& cdf) {
  json out = json::array();
  for (const auto& p : cdf) out.push_back({p.error, p.fraction});
  return out;
}

json report_json(const ErrorReport& r) {
  return {{"mae", r.mae}, {"ce90", r.ce90}, {"median", r.median}, {"count", r.errors.size()},
          {"errors", r.errors}, {"cdf", cdf_json(r.cdf)}};
}

bool parse_on_off(const std::string& s) { return s == "on"; }

// ---- simulate -------------------------------------------------------------

struct SimulateArgs {
  std::string config, trajectory, out;
  unsigned threads = 1;
  std::optional<std::uint64_t> seed;
};

int cmd_simulate(const SimulateArgs& a) {
  auto cfg = load_config(a.config);
  if (a.seed) cfg.scenario.seed = *a.seed;
  std::optional<TrajectorySpec> spec = cfg.trajectory;
  if (!a.trajectory.empty()) spec = load_trajectory(a.trajectory);
  if (!spec) throw Error(Errc::ConfigError, a.config + ": no trajectory given (config key or --trajectory)");
  const auto traj = make_trajectory(spec->waypoints, spec->step);
  if (traj.empty()) throw Error(Errc::InvalidArgument, "trajectory is empty");
  const Scenario scenario(cfg.scenario);
  const auto frames = simulate(scenario, traj, a.threads);
  const auto ds = dataset_from_simulation(frames, scenario);
  write_dataset(a.out, ds);
  std::cout << "frames " << frames.size() << " timestamps " << traj.size() << " antennas "
            << cfg.geometry().antenna_count() << " deployment " << hex(ds.header.deployment_hash) << "\n";
  return 0;
}

// ---- solve ----------------------------------------------------------------

struct SolveArgs {
  std::string dataset, config, report, estimates;
  std::string toa_filter = "off", tdoa_filter = "off", ref = "per-ru", toa_source = "peak", stats = "pooled";
  std::optional<int> particles, iterations;
  std::optional<double> inertia, cognitive, social, slack;
  std::optional<std::uint64_t> seed;
  std::size_t smooth = 1;
  bool allow_mismatch = false;
};

ReferencePolicy parse_ref(const std::string& s) {
  if (s == "per-ru") return ReferencePolicy::per_ru();
  if (s == "common") return ReferencePolicy::common({0, 0});
  // common:RU,ANT
  if (s.rfind("common:", 0) == 0) {
    const auto body = s.substr(7);
    const auto comma = body.find(',');
    if (comma != std::string::npos) {
      try {
        return ReferencePolicy::common({std::stoi(body.substr(0, comma)), std::stoi(body.substr(comma + 1))});
      } catch (const std::exception&) {
      }
    }
  }
  throw CLI::ValidationError("--ref", "expected per-ru, common or common:RU,ANT");
}

int cmd_solve(const SolveArgs& a) {
  const auto cfg = load_config(a.config);
  const auto ds = read_dataset(a.dataset);
  if (ds.header.deployment_hash != cfg.geometry().hash() && !a.allow_mismatch) {
    throw Error(Errc::InvalidArgument, "dataset deployment " + hex(ds.header.deployment_hash) +
                                           " does not match config deployment " + hex(cfg.geometry().hash()));
  }
  PipelineOptions o;
  o.toa_source = a.toa_source == "truth" ? ToaSource::Truth : ToaSource::Peak;
  o.toa_filter = parse_on_off(a.toa_filter);
  o.stats_mode = a.stats == "per-antenna" ? StatsMode::PerAntenna : StatsMode::Pooled;
  o.tdoa_filter = parse_on_off(a.tdoa_filter);
  o.tdoa_slack = a.slack;
  o.policy = parse_ref(a.ref);
  o.pso = cfg.pso;
  if (a.particles) o.pso.particles = *a.particles;
  if (a.iterations) o.pso.iterations = *a.iterations;
  if (a.inertia) o.pso.inertia = *a.inertia;
  if (a.cognitive) o.pso.cognitive = *a.cognitive;
  if (a.social) o.pso.social = *a.social;
  if (a.seed) o.pso.seed = *a.seed;
  o.smooth_window = a.smooth;

  const auto r = run_tdoa_pipeline(ds, cfg.geometry(), o);

  std::ostringstream csv;
  csv.precision(17);
  csv << "timestamp,x,y,z,smoothed_x,smoothed_y,truth_x,truth_y,error,loss,observations,status\n";
  for (const auto& t : r.timestamps) {
    csv << t.timestamp_index << ',';
    if (t.estimate) {
      csv << t.estimate->position.x << ',' << t.estimate->position.y << ',' << t.estimate->position.z << ','
          << t.smoothed->x << ',' << t.smoothed->y << ',';
    } else {
      csv << ",,,,,";
    }
    if (t.truth) {
      csv << t.truth->x << ',' << t.truth->y << ',';
    } else {
      csv << ",,";
    }
    if (t.error) csv << *t.error;
    csv << ',';
    if (t.estimate) csv << t.estimate->loss;
    csv << ',' << t.tdoa_observations << ',' << t.status << '\n';
  }
  if (!a.estimates.empty()) write_text(a.estimates, csv.str());

  json rep = {{"dataset", a.dataset},
              {"deployment_hash", hex(ds.header.deployment_hash)},
              {"timestamps", r.timestamps.size()},
              {"unsolvable", r.unsolvable},
              {"toa", {{"total", r.toa_total}, {"rejected", r.toa_rejected}, {"no_peak", r.no_peak}}},
              {"tdoa", {{"total", r.tdoa_total}, {"rejected", r.tdoa_rejected}}},
              {"options",
               {{"toa_filter", o.toa_filter},
                {"tdoa_filter", o.tdoa_filter},
                {"ref", a.ref},
                {"toa_source", a.toa_source},
                {"smooth", o.smooth_window},
                {"particles", o.pso.particles},
                {"iterations", o.pso.iterations},
                {"seed", o.pso.seed}}}};
  if (r.toa_stats) rep["toa"]["stats"] = {{"mean", r.toa_stats->mean}, {"std", r.toa_stats->std}};
  json traj = json::array();
  for (const auto& t : r.timestamps) {
    json row = {{"t", t.timestamp_index}, {"status", t.status}};
    if (t.smoothed) row["estimate"] = {t.smoothed->x, t.smoothed->y};
    if (t.truth) row["truth"] = {t.truth->x, t.truth->y};
    traj.push_back(row);
  }
  rep["trajectory"] = traj;
  if (r.report) rep["report"] = report_json(*r.report);
  if (!a.report.empty()) write_text(a.report, rep.dump(2) + "\n");

  std::cout << "timestamps " << r.timestamps.size() << " unsolvable " << r.unsolvable << " toa_rejected "
            << r.toa_rejected << " tdoa_rejected " << r.tdoa_rejected;
  if (r.report) std::cout << " mae " << r.report->mae << " ce90 " << r.report->ce90;
  std::cout << "\n";
  if (a.report.empty() && a.estimates.empty()) std::cout << csv.str();
  return 0;
}

// ---- fingerprint ----------------------------------------------------------

struct FingerprintArgs {
  std::string train, test, out_dir;
  double gamma = 0.4;
  std::size_t columns = 100;
  std::size_t k = 5;
};

FingerprintBatch to_batch(const std::vector<FingerprintSample>& samples, const std::vector<LosMask>& masks) {
  FingerprintBatch b;
  if (!samples.empty()) {
    b.row_order = samples.front().input.row_ids;
    b.rows = samples.front().input.rows;
    b.cols = samples.front().input.cols;
  }
  b.samples = samples;
  b.masks = masks;
  return b;
}

int cmd_fingerprint(const FingerprintArgs& a) {
  const auto train = read_dataset(a.train);
  const auto test = read_dataset(a.test);
  FingerprintOptions o;
  o.gamma = a.gamma;
  o.columns = a.columns;
  o.k = a.k;
  const auto run = run_fingerprint(train, test, o);

  // Training samples carry the masks they were built with.
  std::vector<LosMask> train_masks;
  for (const auto& s : run.train) {
    LosMask m;
    m.threshold = a.gamma;
    for (std::size_t r = 0; r < s.input.rows; ++r) {
      const auto row = s.input.row(r);
      m.mask.push_back(std::any_of(row.begin(), row.end(), [](double v) { return v != 0.0; }) ? 1 : 0);
    }
    train_masks.push_back(std::move(m));
  }
  const fs::path dir(a.out_dir);
  fs::create_directories(dir);
  write_fingerprints(dir / "train.cirf", to_batch(run.train, train_masks));
  write_fingerprints(dir / "test.cirf", to_batch(run.test, run.test_masks));

  FingerprintMetadata meta;
  meta.alpha_norm = run.alpha.alpha_norm;
  meta.alpha_source = run.alpha.source;
  meta.gamma = a.gamma;
  meta.columns = a.columns;
  if (!run.train.empty()) meta.row_order = run.train.front().input.row_ids;
  meta.n_fft = train.header.n_fft;
  meta.sample_period = train.header.sample_period;
  meta.deployment_hash = train.header.deployment_hash;
  write_text(dir / "metadata.json", metadata_to_json(meta) + "\n");

  if (run.all_masked > 0) {
    std::cerr << "warning: " << run.all_masked << " test sample(s) fully masked at gamma " << a.gamma << "\n";
  }
  json rep = {{"train", run.train.size()},
              {"test", run.test.size()},
              {"all_masked", run.all_masked},
              {"alpha_norm", run.alpha.alpha_norm},
              {"k", a.k}};
  if (run.report) rep["report"] = report_json(*run.report);
  json preds = json::array();
  for (std::size_t i = 0; i < run.predictions.size(); ++i) {
    json row = {{"t", run.test[i].timestamp_index}, {"estimate", {run.predictions[i].x, run.predictions[i].y}}};
    if (run.report) row["truth"] = {run.test[i].label.x, run.test[i].label.y};
    preds.push_back(row);
  }
  rep["trajectory"] = preds;
  write_text(dir / "report.json", rep.dump(2) + "\n");

  std::cout << "train " << run.train.size() << " test " << run.test.size() << " rows "
            << (run.train.empty() ? 0 : run.train.front().input.rows) << " cols " << a.columns << " all_masked "
            << run.all_masked;
  if (run.report) std::cout << " mae " << run.report->mae << " ce90 " << run.report->ce90;
  std::cout << "\n";
  return 0;
}

// ---- stream ---------------------------------------------------------------

struct StreamArgs {
  std::string dataset, broker, topic, deployment = "deployment", gnb = "gnb0", encoding = "raw";
  double rate = 0.0;  // frames per second, 0 = unlimited
  std::size_t buffer = 1024;
};

std::string default_broker() {
  const char* env = std::getenv("ULTDOA_BROKER");
  return env && *env ? env : "loopback";
}

int cmd_stream(const StreamArgs& a) {
  const auto ds = read_dataset(a.dataset);
  const auto topic = a.topic.empty() ? cir_topic(a.deployment, a.gnb) : a.topic;
  const auto encoding = a.encoding == "base64" ? PayloadEncoding::Base64 : PayloadEncoding::Raw;
  const std::string broker = a.broker.empty() ? default_broker() : a.broker;

  LoopbackBroker loop;
  std::unique_ptr<PubSubClient> client;
  std::unique_ptr<CirSubscriber> echo;
  std::unique_ptr<LoopbackClient> echo_client;
  if (broker == "loopback") {
    client = std::make_unique<LoopbackClient>(loop);
    // In-process subscriber so the run reports an end-to-end count.
    echo_client = std::make_unique<LoopbackClient>(loop);
    echo = std::make_unique<CirSubscriber>([](const CirStreamMessage&) {});
    echo->attach(*echo_client, topic);
  } else {
    auto mq = std::make_unique<mqtt::Client>(mqtt::parse_address(broker),
                                              "ultdoa-stream-" + std::to_string(::getpid()));
    mq->connect();
    client = std::move(mq);
  }

  CirPublisher pub(*client, topic, a.buffer);
  const auto start = std::chrono::steady_clock::now();
  std::size_t n = 0;
  for (const auto& r : ds.records) {
    if (g_stop) break;
    if (a.rate > 0.0) {
      std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                std::chrono::duration<double>(double(n) / a.rate)));
    }
    pub.publish(message_from_frame(r.frame(), a.deployment, encoding));
    ++n;
  }
  pub.flush();
  const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (auto* mq = dynamic_cast<mqtt::Client*>(client.get())) mq->disconnect();

  std::cout << "published " << pub.sent() << " buffered " << pub.buffered() << " dropped " << pub.dropped();
  if (echo) std::cout << " received " << echo->received();
  std::cout << " elapsed " << elapsed << " topic " << topic << "\n";
  return pub.buffered() == 0 && pub.dropped() == 0 ? 0 : kDataError;
}

struct ListenArgs {
  std::string broker, filter = "cir/#";
  std::size_t count = 0;
  double timeout = 10.0;
};

int cmd_listen(const ListenArgs& a) {
  const std::string broker = a.broker.empty() ? default_broker() : a.broker;
  if (broker == "loopback") throw CLI::ValidationError("--broker", "listen needs a network broker");
  mqtt::Client client(mqtt::parse_address(broker), "ultdoa-listen-" + std::to_string(::getpid()));
  client.connect();
  std::mutex mu;
  CirSubscriber sub([&](const CirStreamMessage& m) {
    std::lock_guard lock(mu);
    std::cout << m.deployment_id << ' ' << m.timestamp_index << ' ' << m.antenna.ru << ' ' << m.antenna.antenna
              << ' ' << m.sequence << '\n';
  });
  sub.attach(client, a.filter);
  std::cout << "ready\n" << std::flush;
  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(a.timeout);
  while (!g_stop && std::chrono::steady_clock::now() < deadline && (a.count == 0 || sub.received() < a.count)) {
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  client.disconnect();
  std::cout << "received " << sub.received() << " duplicates " << sub.duplicates() << " decode_errors "
            << sub.decode_errors() << "\n";
  return a.count == 0 || sub.received() >= a.count ? 0 : kDataError;
}

// ---- broker ---------------------------------------------------------------

int cmd_broker(std::uint16_t port, const std::string& bind, double duration) {
  mqtt::Broker broker(port, bind);
  std::cout << "listening " << bind << ':' << broker.port() << "\n" << std::flush;
  const auto start = std::chrono::steady_clock::now();
  while (!g_stop) {
    if (duration > 0 && std::chrono::steady_clock::now() - start >= std::chrono::duration<double>(duration)) break;
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
  }
  broker.stop();
  std::cout << "forwarded " << broker.forwarded() << "\n";
  return 0;
}

// ---- plotdata -------------------------------------------------------------

int cmd_plotdata(const std::string& report_path, const std::string& out_dir) {
  json rep;
  try {
    rep = json::parse(read_text(report_path));
  } catch (const json::exception& e) {
    throw Error(Errc::CorruptPayload, report_path + ": " + e.what());
  }
  const fs::path dir(out_dir);
  fs::create_directories(dir);
  std::size_t cdf_rows = 0, traj_rows = 0;
  if (rep.contains("report")) {
    const auto errors = rep["report"]["errors"].get<std::vector<double>>();
    const auto cdf = error_cdf(errors);
    write_text(dir / "cdf.csv", cdf_to_csv(cdf));
    cdf_rows = cdf.size();
  }
  std::ostringstream csv;
  csv.precision(17);
  csv << "timestamp,x,y,truth_x,truth_y\n";
  for (const auto& row : rep.value("trajectory", json::array())) {
    csv << row.at("t").get<std::int64_t>() << ',';
    if (row.contains("estimate")) {
      csv << row["estimate"][0].get<double>() << ',' << row["estimate"][1].get<double>() << ',';
    } else {
      csv << ",,";
    }
    if (row.contains("truth")) csv << row["truth"][0].get<double>() << ',' << row["truth"][1].get<double>();
    else csv << ',';
    csv << '\n';
    ++traj_rows;
  }
  write_text(dir / "trajectory.csv", csv.str());
  std::cout << "cdf " << cdf_rows << " trajectory " << traj_rows << "\n";
  return 0;
}

void on_signal(int) { g_stop = true; }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);

  CLI::App app{"Uplink TDoA positioning toolkit"};
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic CIR dataset");
  simulate->add_option("-c,--config", sim.config, "Scenario YAML")->required()->check(CLI::ExistingFile);
  simulate->add_option("-t,--trajectory", sim.trajectory, "Trajectory YAML (overrides the config)")
      ->check(CLI::ExistingFile);
  simulate->add_option("-o,--out", sim.out, "Dataset file")->required();
  simulate->add_option("--threads", sim.threads, "Worker threads")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", sim.seed, "Override the scenario seed");

  SolveArgs sol;
  auto* solve = app.add_subcommand("solve", "ToA, filters, TDoA, PSO and smoothing over a dataset");
  solve->add_option("-d,--dataset", sol.dataset)->required()->check(CLI::ExistingFile);
  solve->add_option("-c,--config", sol.config, "Deployment and PSO settings")->required()->check(CLI::ExistingFile);
  solve->add_option("-r,--report", sol.report, "Report JSON");
  solve->add_option("-e,--estimates", sol.estimates, "Per-timestamp estimates CSV");
  solve->add_option("--toa-filter", sol.toa_filter)->check(CLI::IsMember({"on", "off"}));
  solve->add_option("--toa-stats", sol.stats, "Statistics for the ToA filter")
      ->check(CLI::IsMember({"pooled", "per-antenna"}));
  solve->add_option("--tdoa-filter", sol.tdoa_filter)->check(CLI::IsMember({"on", "off"}));
  solve->add_option("--tdoa-slack", sol.slack, "Bound slack in seconds (default one sample period)");
  solve->add_option("--ref", sol.ref, "per-ru, common or common:RU,ANT");
  solve->add_option("--toa-source", sol.toa_source, "peak or truth (simulator delays)")
      ->check(CLI::IsMember({"peak", "truth"}));
  solve->add_option("--particles", sol.particles)->check(CLI::PositiveNumber);
  solve->add_option("--iterations", sol.iterations)->check(CLI::NonNegativeNumber);
  solve->add_option("--inertia", sol.inertia);
  solve->add_option("--cognitive", sol.cognitive);
  solve->add_option("--social", sol.social);
  solve->add_option("--seed", sol.seed);
  solve->add_option("--smooth", sol.smooth, "Moving-average window")->check(CLI::PositiveNumber);
  solve->add_flag("--allow-deployment-mismatch", sol.allow_mismatch);

  FingerprintArgs fp;
  auto* fingerprint = app.add_subcommand("fingerprint", "Preprocess fingerprints and run the kNN baseline");
  fingerprint->add_option("--train", fp.train)->required()->check(CLI::ExistingFile);
  fingerprint->add_option("--test", fp.test)->required()->check(CLI::ExistingFile);
  fingerprint->add_option("-o,--out-dir", fp.out_dir)->required();
  fingerprint->add_option("--gamma", fp.gamma, "Mask threshold on the normalized row peak");
  fingerprint->add_option("--columns", fp.columns, "Delay columns kept")->check(CLI::PositiveNumber);
  fingerprint->add_option("-k", fp.k, "Neighbours")->check(CLI::PositiveNumber);

  StreamArgs st;
  auto* stream = app.add_subcommand("stream", "Publish a dataset's frames on the CIR topic");
  stream->add_option("-d,--dataset", st.dataset)->required()->check(CLI::ExistingFile);
  stream->add_option("-b,--broker", st.broker, "loopback or host:port (default $ULTDOA_BROKER, else loopback)");
  stream->add_option("--topic", st.topic, "Default cir/<deployment>/<gnb>");
  stream->add_option("--deployment", st.deployment);
  stream->add_option("--gnb", st.gnb);
  stream->add_option("--rate", st.rate, "Frames per second, 0 for unlimited")->check(CLI::NonNegativeNumber);
  stream->add_option("--encoding", st.encoding)->check(CLI::IsMember({"raw", "base64"}));
  stream->add_option("--buffer", st.buffer, "Messages held while disconnected");

  ListenArgs li;
  auto* listen = app.add_subcommand("listen", "Subscribe to CIR topics and print one line per frame");
  listen->add_option("-b,--broker", li.broker, "host:port (default $ULTDOA_BROKER)");
  listen->add_option("--filter", li.filter);
  listen->add_option("--count", li.count, "Exit after this many frames");
  listen->add_option("--timeout", li.timeout, "Seconds");

  std::uint16_t port = 1883;
  std::string bind = "127.0.0.1";
  double duration = 0.0;
  auto* broker = app.add_subcommand("broker", "Run the bundled MQTT broker");
  broker->add_option("-p,--port", port, "0 picks a free port");
  broker->add_option("--bind", bind);
  broker->add_option("--duration", duration, "Seconds, 0 runs until interrupted");

  std::string report_path, plot_dir;
  auto* plotdata = app.add_subcommand("plotdata", "CDF and trajectory CSVs from a report");
  plotdata->add_option("-r,--report", report_path)->required()->check(CLI::ExistingFile);
  plotdata->add_option("-o,--out-dir", plot_dir)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*simulate) return cmd_simulate(sim);
    if (*solve) return cmd_solve(sol);
    if (*fingerprint) return cmd_fingerprint(fp);
    if (*stream) return cmd_stream(st);
    if (*listen) return cmd_listen(li);
    if (*broker) return cmd_broker(port, bind, duration);
    if (*plotdata) return cmd_plotdata(report_path, plot_dir);
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}
