#include <sys/wait.h>

#include <cstdlib>
#include <sstream>
#include <thread>

#include "al/results_io.hpp"
#include "al/service.hpp"
#include "al/synthetic.hpp"
#include "doctest.h"
#include "httplib.h"
#include "test_helpers.hpp"

using namespace al;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Workspace {
  test::TempDir dir{"service"};

  Workspace() {
    SyntheticSpec spec;
    spec.size = 300;
    spec.seed = 9;
    write_jsonl(make_synthetic_dataset(spec), dir / "train.jsonl");
  }

  json config() const {
    return {{"dataset", {{"name", "synth"}, {"train", "train.jsonl"}, {"classes", {"class0", "class1"}},
                         {"test_fraction", 0.2}}},
            {"strategy", {{"names", {"bt", "rs"}}}},
            {"loop", {{"seed_set_size", 10}, {"query_size", 10}, {"num_iterations", 3}, {"seeds", {0, 1}}}}};
  }

  fs::path write_config(const json& doc, const std::string& name = "exp.json") const {
    const auto path = dir / name;
    test::write_file(path, doc.dump(2));
    return path;
  }
};

struct CommandResult {
  int exit_code = 0;
  std::string out;
  std::string err;
};

CommandResult run_cli(const std::string& args, const fs::path& scratch) {
  const auto out = scratch / "stdout.txt";
  const auto err = scratch / "stderr.txt";
  const std::string command =
      std::string("'") + AL_CLI + "' " + args + " > '" + out.string() + "' 2> '" + err.string() + "'";
  const int status = std::system(command.c_str());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, test::read_file(out), test::read_file(err)};
}

std::string strip(std::string s) {
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.pop_back();
  return s;
}

}  // namespace

TEST_CASE("run writes one result file per strategy and seed plus a manifest") {
  Workspace w;
  std::ostringstream log;
  RunOverrides overrides;
  overrides.out = w.dir / "out";
  const auto manifest = cmd_run(w.write_config(w.config()), overrides, log);
  CHECK(manifest.runs.size() == 4);
  CHECK(fs::exists(w.dir / "out" / "manifest.json"));
  CHECK(fs::exists(w.dir / "out" / "config.json"));
  CHECK(fs::exists(w.dir / "out" / "results.csv"));
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(w.dir / "out" / "runs")) ++files;
  CHECK(files == 4);

  const auto back = read_manifest(w.dir / "out" / "manifest.json");
  REQUIRE(back.runs.size() == 4);
  for (const auto& entry : back.runs) {
    const auto doc = json::parse(test::read_file(back.dir / entry.file));
    const auto result = result_from_json(doc);
    CHECK(run_id(result) == entry.run_id);
    CHECK(result.records.size() == 4);
  }
  const auto csv = test::read_file(w.dir / "out" / "results.csv");
  CHECK(csv.rfind(kResultsCsvHeader, 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 1 + 4 * 4);
  CHECK(log.str().find("synth-bt-builtin-s1") != std::string::npos);
}

TEST_CASE("overrides replace strategies and seeds and are kept in the snapshot") {
  Workspace w;
  std::ostringstream log;
  RunOverrides overrides;
  overrides.strategy = "ca";
  overrides.seed = 7;
  overrides.out = w.dir / "out";
  const auto manifest = cmd_run(w.write_config(w.config()), overrides, log);
  REQUIRE(manifest.runs.size() == 1);
  CHECK(manifest.runs[0].strategy == "ca");
  CHECK(manifest.runs[0].seed == 7);
  const auto snapshot = json::parse(test::read_file(w.dir / "out" / "config.json"));
  CHECK(snapshot["strategy"]["names"] == json::array({"ca"}));
  CHECK(snapshot["loop"]["seeds"] == json::array({7}));

  RunOverrides bad;
  bad.strategy = "zz";
  CHECK_THROWS_AS(cmd_run(w.write_config(w.config()), bad, log), ConfigError);
}

TEST_CASE("reports in csv and markdown agree") {
  Workspace w;
  std::ostringstream log;
  RunOverrides overrides;
  overrides.out = w.dir / "out";
  cmd_run(w.write_config(w.config()), overrides, log);
  const auto manifest = w.dir / "out" / "manifest.json";
  const auto md_files = cmd_report(manifest, ReportFormat::kMarkdown);
  const auto csv_files = cmd_report(manifest, ReportFormat::kCsv, w.dir / "csv");
  CHECK(fs::exists(w.dir / "out" / "report" / "report.md"));
  CHECK(fs::exists(w.dir / "csv" / "summary.csv"));
  CHECK(md_files.size() == 2);
  CHECK(csv_files.size() == 5);

  const auto md = test::read_file(w.dir / "out" / "report" / "report.md");
  std::istringstream summary(test::read_file(w.dir / "csv" / "summary.csv"));
  std::string line;
  std::getline(summary, line);
  std::size_t rows = 0;
  while (std::getline(summary, line)) {
    std::vector<std::string> f;
    std::istringstream in(line);
    for (std::string part; std::getline(in, part, ',');) f.push_back(part);
    REQUIRE(f.size() == 6);
    for (auto& ch : f[1]) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
    const auto row = "| " + f[0] + " | " + f[1] + " | " + f[2] + " | " + f[3] + " | " + f[4] + " | " + f[5] + " |";
    CHECK_MESSAGE(md.find(row) != std::string::npos, row);
    ++rows;
  }
  CHECK(rows == 2);
}

TEST_CASE("report rejects empty manifests and missing result files") {
  Workspace w;
  RunManifest empty;
  empty.config_file = "config.json";
  empty.results_csv = "results.csv";
  write_manifest(empty, w.dir / "empty.json");
  CHECK_THROWS(cmd_report(w.dir / "empty.json", ReportFormat::kCsv));

  std::ostringstream log;
  RunOverrides overrides;
  overrides.out = w.dir / "out";
  const auto manifest = cmd_run(w.write_config(w.config()), overrides, log);
  fs::remove(manifest.dir / manifest.runs[1].file);
  CHECK_THROWS(cmd_report(w.dir / "out" / "manifest.json", ReportFormat::kMarkdown));
  CHECK_THROWS(cmd_report(w.dir / "nothing.json", ReportFormat::kMarkdown));
}

TEST_CASE("run refuses datasets without gold labels") {
  Workspace w;
  auto doc = w.config();
  doc["dataset"]["train"] = (fs::path(AL_TEST_DATA_DIR) / "small.csv").string();
  doc["dataset"]["format"] = "csv";
  doc["dataset"]["classes"] = {"pos", "neg"};
  std::ostringstream log;
  CHECK_THROWS_AS(cmd_run(w.write_config(doc), {}, log), DataError);
}

TEST_CASE("cli run and report succeed end to end") {
  Workspace w;
  const auto config = w.write_config(w.config());
  const auto run = run_cli("run --config '" + config.string() + "' --out '" + (w.dir / "cli").string() +
                               "' --strategy bt --seed 3",
                           w.dir.path());
  REQUIRE_MESSAGE(run.exit_code == 0, run.err);
  const auto manifest = strip(run.out);
  CHECK(manifest == (w.dir / "cli" / "manifest.json").string());
  const auto snapshot = json::parse(test::read_file(w.dir / "cli" / "config.json"));
  CHECK(snapshot["strategy"]["names"] == json::array({"bt"}));
  CHECK(snapshot["loop"]["seeds"] == json::array({3}));

  const auto report = run_cli("report --manifest '" + manifest + "' --format markdown", w.dir.path());
  CHECK_MESSAGE(report.exit_code == 0, report.err);
  CHECK(fs::exists(w.dir / "cli" / "report" / "report.md"));
}

TEST_CASE("cli names the offending key of a malformed config") {
  Workspace w;
  auto doc = w.config();
  doc["loop"]["foo"] = 1;
  const auto run = run_cli("run --config '" + w.write_config(doc).string() + "'", w.dir.path());
  CHECK(run.exit_code != 0);
  CHECK(run.err.find("loop.foo") != std::string::npos);

  doc = w.config();
  doc["loop"]["num_iterations"] = -1;
  const auto negative = run_cli("run --config '" + w.write_config(doc).string() + "'", w.dir.path());
  CHECK(negative.exit_code != 0);
  CHECK(negative.err.find("loop.num_iterations") != std::string::npos);

  const auto format = run_cli("report --manifest x.json --format html", w.dir.path());
  CHECK(format.exit_code != 0);
  CHECK(format.err.find("html") != std::string::npos);
}

TEST_CASE("address parsing") {
  CHECK(parse_address("127.0.0.1:8080") == std::pair<std::string, int>{"127.0.0.1", 8080});
  CHECK(parse_address("localhost:0").second == 0);
  CHECK_THROWS(parse_address("localhost"));
  CHECK_THROWS(parse_address("localhost:http"));
  CHECK_THROWS(parse_address("localhost:99999"));
}

namespace {

class RunningServer {
 public:
  RunningServer(const fs::path& root, bool async) : store_(std::make_shared<SessionStore>(root, async)), service_(store_) {
    port_ = service_.bind("127.0.0.1", 0);
    REQUIRE(port_ > 0);
    thread_ = std::thread([this] { service_.listen(); });
    service_.wait_until_ready();
  }
  ~RunningServer() {
    service_.stop();
    thread_.join();
  }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

 private:
  std::shared_ptr<SessionStore> store_;
  HttpService service_;
  int port_ = -1;
  std::thread thread_;
};

json body_of(const httplib::Result& res) {
  REQUIRE(res);
  return json::parse(res->body);
}

json gold_answer(const json& batch, const Dataset& data, bool by_name) {
  json labels = json::array();
  for (const auto& x : batch["instances"]) {
    const auto id = x["id"].get<std::size_t>();
    const auto gold = *data.at(id).gold_label;
    labels.push_back({{"id", id}, {"label", by_name ? json(data.schema().name_of(gold)) : json(gold)}});
  }
  return {{"batch_id", batch["batch_id"]}, {"labels", labels}};
}

}  // namespace

TEST_CASE("http labeling session end to end") {
  Workspace w;
  auto doc = w.config();
  doc["dataset"]["train"] = (w.dir / "train.jsonl").string();
  doc["strategy"] = {{"name", "bt"}};
  doc["loop"]["seed_set_size"] = 25;
  doc["loop"]["query_size"] = 25;
  doc["loop"]["num_iterations"] = 2;
  const auto config = parse_config(doc, "/");
  const auto data = load_data(config.dataset);
  const auto store = w.dir / "store";

  std::string id;
  json progress_before;
  {
    RunningServer server(store, false);
    auto client = server.client();

    auto created = client.Post("/sessions", doc.dump(), "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    CHECK(created->get_header_value("Access-Control-Allow-Origin") == "*");
    id = body_of(created)["session_id"].get<std::string>();

    auto bad = client.Post("/sessions", "{", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(body_of(bad)["error"] == "invalid_json");
    json invalid = doc;
    invalid["loop"]["bogus"] = true;
    auto rejected = client.Post("/sessions", invalid.dump(), "application/json");
    CHECK(rejected->status == 400);
    CHECK(body_of(rejected)["error"] == "invalid_config");

    auto batch = body_of(client.Get(("/sessions/" + id + "/batch").c_str()));
    CHECK(batch["batch_id"] == 0);
    REQUIRE(batch["instances"].size() == 25);
    CHECK(batch["instances"][0]["text"].get<std::string>().rfind("w", 0) == 0);
    CHECK(batch["class_names"] == json::array({"class0", "class1"}));
    CHECK(batch["status"] == "awaiting_labels");

    auto missing = gold_answer(batch, *data.train, true);
    missing["labels"].erase(missing["labels"].size() - 1);
    auto incomplete = client.Post(("/sessions/" + id + "/labels").c_str(), missing.dump(), "application/json");
    CHECK(incomplete->status == 422);
    CHECK(body_of(incomplete)["error"] == "incomplete_labels");

    auto wrong = gold_answer(batch, *data.train, true);
    wrong["labels"][0]["label"] = "class9";
    auto invalid_label = client.Post(("/sessions/" + id + "/labels").c_str(), wrong.dump(), "application/json");
    CHECK(invalid_label->status == 422);
    CHECK(body_of(invalid_label)["error"] == "invalid_label");

    auto accepted = client.Post(("/sessions/" + id + "/labels").c_str(), gold_answer(batch, *data.train, true).dump(),
                                "application/json");
    CHECK(accepted->status == 200);
    CHECK(body_of(accepted)["status"] == "awaiting_labels");

    auto stale = gold_answer(batch, *data.train, false);
    stale["labels"][0]["label"] = 1 - stale["labels"][0]["label"].get<int>();
    auto conflict = client.Post(("/sessions/" + id + "/labels").c_str(), stale.dump(), "application/json");
    CHECK(conflict->status == 409);
    CHECK(body_of(conflict)["error"] == "stale_batch");

    auto next = body_of(client.Get(("/sessions/" + id + "/batch").c_str()));
    CHECK(next["batch_id"] == 1);
    CHECK(next["instances"].size() == 25);
    auto second = client.Post(("/sessions/" + id + "/labels").c_str(), gold_answer(next, *data.train, false).dump(),
                              "application/json");
    CHECK(second->status == 200);

    auto unknown = client.Get("/sessions/nope/progress");
    CHECK(unknown->status == 404);
    CHECK(body_of(unknown)["error"] == "not_found");

    auto options = client.Options("/sessions");
    CHECK(options->status == 204);

    progress_before = body_of(client.Get(("/sessions/" + id + "/progress").c_str()));
    CHECK(progress_before["iteration"] == 2);
    CHECK(progress_before["num_labeled"] == 50);
    CHECK(progress_before["num_iterations"] == 2);
    CHECK(progress_before["curve"].size() == 2);
    CHECK(progress_before["curve"][1]["accuracy"].is_number());

    auto list = body_of(client.Get("/sessions"));
    CHECK(list["sessions"].size() == 1);
    CHECK(list["sessions"][0]["session_id"] == id);
  }
  RunningServer restarted(store, false);
  auto client = restarted.client();
  CHECK(body_of(client.Get(("/sessions/" + id + "/progress").c_str())) == progress_before);
  auto last = body_of(client.Get(("/sessions/" + id + "/batch").c_str()));
  CHECK(last["batch_id"] == 2);
  client.Post(("/sessions/" + id + "/labels").c_str(), gold_answer(last, *data.train, true).dump(), "application/json");
  auto done = body_of(client.Get(("/sessions/" + id + "/batch").c_str()));
  CHECK(done["batch_id"].is_null());
  CHECK(done["status"] == "finished");
}

TEST_CASE("http training runs in the background") {
  Workspace w;
  auto doc = w.config();
  doc["dataset"]["train"] = (w.dir / "train.jsonl").string();
  doc["strategy"] = {{"name", "ca"}};
  const auto data = load_data(parse_config(doc, "/").dataset);
  RunningServer server(w.dir / "store", true);
  auto client = server.client();
  const auto id = body_of(client.Post("/sessions", doc.dump(), "application/json"))["session_id"].get<std::string>();
  for (int round = 0; round < 4; ++round) {
    json batch;
    for (int attempt = 0; attempt < 2000; ++attempt) {
      batch = body_of(client.Get(("/sessions/" + id + "/batch").c_str()));
      if (batch["status"] != "training") break;
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    REQUIRE(batch["status"] == "awaiting_labels");
    auto posted = client.Post(("/sessions/" + id + "/labels").c_str(), gold_answer(batch, *data.train, false).dump(),
                              "application/json");
    CHECK(posted->status == 200);
    CHECK(body_of(posted)["status"] == "training");
  }
  json progress;
  for (int attempt = 0; attempt < 2000; ++attempt) {
    progress = body_of(client.Get(("/sessions/" + id + "/progress").c_str()));
    if (progress["status"] != "training") break;
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  CHECK(progress["status"] == "finished");
  CHECK(progress["curve"].size() == 4);
}

TEST_CASE("http refuses a corrupt session and serves the rest") {
  Workspace w;
  auto doc = w.config();
  doc["dataset"]["train"] = (w.dir / "train.jsonl").string();
  const auto store = w.dir / "store";
  std::string good, bad;
  {
    SessionStore s(store, false);
    good = s.create(doc)->id();
    bad = s.create(doc)->id();
  }
  test::write_file(store / bad / "labels.jsonl", "garbage\n{}\n");
  RunningServer server(store, false);
  auto client = server.client();
  auto refused = client.Get(("/sessions/" + bad + "/batch").c_str());
  CHECK(refused->status == 503);
  CHECK(body_of(refused)["error"] == "corrupt_session");
  CHECK(client.Get(("/sessions/" + good + "/batch").c_str())->status == 200);
  auto list = body_of(client.Get("/sessions"));
  CHECK(list["sessions"].size() == 1);
  CHECK(list["corrupt"].size() == 1);
  CHECK(list["corrupt"][0]["session_id"] == bad);
}
