#include <doctest.h>

#include <atomic>

#include "axp/run.hpp"
#include "fixtures.hpp"

using namespace axp;
namespace fs = std::filesystem;

namespace {

const fs::path& dataset() {
  static const fs::path dir = [] {
    const auto d = fixture::temp_dir("run_ds");
    DatasetConfig cfg;
    cfg.per_category = 1;
    cfg.views_per_entry = 3;
    cfg.seed = 11;
    cfg.out_dir = d;
    generate_dataset(cfg);
    return d;
  }();
  return dir;
}

RunConfig oracle_config(const fs::path& run_dir) {
  RunConfig c;
  c.dataset_dir = dataset();
  c.run_dir = run_dir;
  c.backend.kind = BackendKind::Oracle;
  return c;
}

// Oracle that fails once `budget` replies have been produced.
class FlakyOracle : public Backend {
 public:
  explicit FlakyOracle(int budget) : budget_(budget) {}
  BackendKind kind() const override { return BackendKind::Oracle; }
  std::string name() const override { return "oracle"; }
  ModelReply send(const TaskInstance& inst) const override {
    if (budget_-- <= 0) throw Error(ErrorCode::BackendFailure, "injected failure");
    return inner_.send(inst);
  }

 private:
  OracleBackend inner_{{}};
  mutable std::atomic<int> budget_;
};

}  // namespace

TEST_CASE("oracle run scores 1.00 everywhere and writes the run directory") {
  const auto dir = fixture::temp_dir("run_oracle");
  const auto r = run_experiment(oracle_config(dir));
  CHECK(r.records.size() == 3 * 3 * 4);
  CHECK(r.sent == r.records.size());
  for (const auto& rec : r.records) CHECK(rec.score.accuracy == 1.0);
  REQUIRE(r.tables.size() == 3);
  for (const auto& t : r.tables) {
    REQUIRE(t.rows.size() == 3);
    CHECK(t.rows[0].condition == "oracle");
    CHECK(t.rows[1].condition == "oracle+3DAP");
    CHECK(t.rows[2].condition == "oracle+3DAP-scale");
    for (const auto& row : t.rows) CHECK(row.overall == 1.0);
  }
  for (const char* f : {"run_meta.json", "scores.json", "report.md", "report.csv", "exchanges/replies.json"}) {
    CHECK(fs::exists(dir / f));
  }
  CHECK_FALSE(fs::exists(dir / "RESUME"));
  const auto& id = r.records.front().score.instance_id;
  CHECK(fs::exists(dir / "instances" / (id + ".json")));
  CHECK(fs::exists(dir / "instances" / id / "image_0.png"));
  CHECK(fs::exists(dir / "scores" / (id + ".json")));

  const auto tables = evaluate_run(dir);
  CHECK(reports_csv(tables) == reports_csv(r.tables));
  CHECK(read_text_file(dir / "report.csv") == reports_csv(r.tables));

  // Determinism: a second run produces byte-identical scores.
  const auto dir2 = fixture::temp_dir("run_oracle2");
  run_experiment(oracle_config(dir2));
  CHECK(read_text_file(dir / "scores.json") == read_text_file(dir2 / "scores.json"));
  CHECK(read_text_file(dir / "report.md") == read_text_file(dir2 / "report.md"));

  // Replaying the archived replies reproduces every score.
  const auto dir3 = fixture::temp_dir("run_replay");
  auto replay = oracle_config(dir3);
  replay.backend.kind = BackendKind::Scripted;
  replay.backend.fixtures = dir / "exchanges" / "replies.json";
  replay.backend.label = "oracle";
  const auto rr = run_experiment(replay);
  CHECK(reports_csv(rr.tables) == reports_csv(r.tables));

  // A non-empty directory is refused without resume.
  try {
    run_experiment(oracle_config(dir));
    FAIL("expected IoFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::IoFailure);
  }
  for (const auto& d : {dir, dir2, dir3}) fs::remove_all(d);
}

TEST_CASE("an interrupted run resumes to the same result") {
  const auto ref_dir = fixture::temp_dir("run_ref");
  auto ref_cfg = oracle_config(ref_dir);
  ref_cfg.backend.oracle.noise_sigma = 2.0;
  const auto ref = run_experiment(ref_cfg);

  const auto dir = fixture::temp_dir("run_resume");
  auto cfg = ref_cfg;
  cfg.run_dir = dir;
  try {
    run_experiment(cfg, FlakyOracle(10));
    FAIL("expected the injected failure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BackendFailure);
  }
  CHECK(fs::exists(dir / "RESUME"));
  int partial = 0;
  for (const auto& p : fs::directory_iterator(dir / "scores")) partial += p.is_regular_file();
  CHECK(partial == 10);

  auto mismatched = cfg;
  mismatched.resume = true;
  mismatched.seed = 2;
  CHECK_THROWS_AS(run_experiment(mismatched), Error);

  cfg.resume = true;
  const auto resumed = run_experiment(cfg);
  CHECK(resumed.resumed == 10);
  CHECK(resumed.sent == ref.records.size() - 10);
  CHECK(read_text_file(dir / "scores.json") == read_text_file(ref_dir / "scores.json"));
  CHECK(read_text_file(dir / "report.csv") == read_text_file(ref_dir / "report.csv"));
  CHECK_FALSE(fs::exists(dir / "RESUME"));
  fs::remove_all(dir);
  fs::remove_all(ref_dir);
}

TEST_CASE("run configuration errors") {
  auto cfg = oracle_config(fixture::temp_dir("run_bad"));
  cfg.tasks.clear();
  CHECK_THROWS_AS(run_experiment(cfg), Error);
  cfg = oracle_config(fixture::temp_dir("run_bad2"));
  cfg.backend.kind = BackendKind::Scripted;
  cfg.backend.fixtures = cfg.run_dir / "missing.json";
  CHECK_THROWS_AS(run_experiment(cfg), Error);
  CHECK(score_record_from_json(score_record_to_json({{"i", {true, false}, 0.5, false, ""},
                                                     Condition::NoScale,
                                                     TaskKind::Matching,
                                                     Category::Sofa,
                                                     "sofa_000"}))
            .score.accuracy == 0.5);
}
