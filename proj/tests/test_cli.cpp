#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

using namespace std::string_literals;
namespace fs = std::filesystem;

// end-to-end checks of the installed binary: exit codes, artifacts, determinism

static fs::path cli_dir() {
  fs::path p = fs::temp_directory_path() / "mmlda_test_cli";
  fs::create_directories(p);
  return p;
}

static int run_cli(const std::string& args) {
  fs::path dir = cli_dir();
  std::string cmd = "\""s + MMLDA_CLI_PATH + "\" " + args + " > \"" + (dir / "stdout.txt").string() +
                    "\" 2> \"" + (dir / "stderr.txt").string() + "\"";
  int status = std::system(cmd.c_str());
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

static std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

static void put(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  out << body;
}

static std::string captured_stdout() { return slurp(cli_dir() / "stdout.txt"); }
static std::string captured_stderr() { return slurp(cli_dir() / "stderr.txt"); }

// small end-to-end configuration: 16-document synthetic corpus, three
// concepts with k=3 over the four stock modalities
static fs::path pipeline_config(const fs::path& out_dir, unsigned seed = 5) {
  fs::path cfg = cli_dir() / ("config_" + out_dir.filename().string() + ".json");
  std::ostringstream body;
  body << "{\n"
       << " \"synth\": {\"kind\": \"default\", \"docs\": 16, \"concentration\": 0.05},\n"
       << " \"hierarchy\": {\n"
       << "  \"top_k\": 4, \"rounds\": 2, \"lower_sweeps\": 10, \"top_sweeps\": 15,\n"
       << "  \"weight\": 50,\n"
       << "  \"lower\": [\n"
       << "   {\"id\": \"I\", \"modalities\": [\"eda\", \"rri\"], \"k\": 3},\n"
       << "   {\"id\": \"V\", \"modalities\": [\"vision\"], \"k\": 3},\n"
       << "   {\"id\": \"W\", \"modalities\": [\"word\"], \"k\": 3}\n"
       << "  ]\n"
       << " },\n"
       << " \"out\": \"" << out_dir.string() << "\",\n"
       << " \"seed\": " << seed << ",\n"
       << " \"runs\": 2\n"
       << "}\n";
  put(cfg, body.str());
  return cfg;
}

TEST_CASE("cli: help exits cleanly and lists the subcommands") {
  CHECK(run_cli("--help") == 0);
  std::string out = captured_stdout();
  for (const char* sub : {"synth", "preprocess", "train", "predict", "eval", "compare", "report"})
    CHECK(out.find(sub) != std::string::npos);
}

TEST_CASE("cli: usage errors exit with status two") {
  CHECK(run_cli("") == 2);                      // a subcommand is required
  CHECK(run_cli("train") == 2);                 // --config is required
  CHECK(run_cli("frobnicate --config x") == 2); // unknown subcommand
  CHECK(run_cli("train --config x --bogus") == 2);
}

TEST_CASE("cli: configuration problems exit with status two") {
  fs::path dir = cli_dir();
  CHECK(run_cli("train --config " + (dir / "no_such_config.json").string()) == 2);

  put(dir / "bad.json", "{ nope");
  CHECK(run_cli("train --config " + (dir / "bad.json").string()) == 2);

  put(dir / "unknown_key.json", "{\"synt\": {}, \"out\": \"" + (dir / "o").string() + "\"}");
  CHECK(run_cli("train --config " + (dir / "unknown_key.json").string()) == 2);

  put(dir / "no_out.json", "{\"synth\": {\"docs\": 4}}");
  CHECK(run_cli("synth --config " + (dir / "no_out.json").string()) == 2);

  put(dir / "both.json",
      "{\"corpus\": \"c.json\", \"synth\": {\"docs\": 4}, \"out\": \"" + (dir / "o").string() +
          "\"}");
  CHECK(run_cli("synth --config " + (dir / "both.json").string()) == 2);
  CHECK(captured_stderr().find("error:") != std::string::npos);
}

TEST_CASE("cli: an empty synthetic corpus warns but succeeds") {
  fs::path dir = cli_dir();
  fs::path out = dir / "empty_out";
  put(dir / "empty.json",
      "{\"synth\": {\"docs\": 0}, \"out\": \"" + out.string() + "\", \"seed\": 3}");
  CHECK(run_cli("synth --config " + (dir / "empty.json").string()) == 0);
  CHECK(captured_stderr().find("empty corpus") != std::string::npos);
  CHECK(fs::exists(out / "corpus.json"));
}

TEST_CASE("cli: pipeline produces artifacts and is bytewise repeatable") {
  fs::path dir = cli_dir();
  fs::path out = dir / "run_a";
  fs::remove_all(out);
  std::string cfg = pipeline_config(out).string();

  // eval before train names the missing model
  CHECK(run_cli("eval --config " + cfg) == 2);
  CHECK(captured_stderr().find("run train first") != std::string::npos);

  REQUIRE(run_cli("synth --config " + cfg) == 0);
  CHECK(captured_stdout().find("16 documents") != std::string::npos);
  for (const char* name : {"corpus.json", "gen_params.json", "ground_truth.json"})
    CHECK(fs::exists(out / name));

  REQUIRE(run_cli("train --config " + cfg) == 0);
  CHECK(fs::exists(out / "model.json"));
  std::string diag = slurp(out / "diagnostics.csv");
  CHECK(diag.rfind("round,top_loglik,delta_I,delta_V,delta_W", 0) == 0);
  CHECK(diag.find("\n1,") != std::string::npos);
  CHECK(diag.find("\n2,") != std::string::npos);

  REQUIRE(run_cli("predict --config " + cfg + " --source I --target vision") == 0);
  std::string preds = slurp(out / "predictions_I_vision.csv");
  CHECK(preds.rfind("doc_id,p0,p1,", 0) == 0);
  CHECK(run_cli("predict --config " + cfg + " --source I --target nope") == 2);
  CHECK(run_cli("predict --config " + cfg + " --source nope --target vision") == 2);

  REQUIRE(run_cli("eval --config " + cfg) == 0);
  CHECK(fs::exists(out / "eval_rows.csv"));
  CHECK(fs::exists(out / "eval_summary.csv"));
  CHECK(slurp(out / "eval_summary.csv").rfind("rand,", 0) == 0);

  REQUIRE(run_cli("compare --config " + cfg) == 0);
  std::string table = slurp(out / "compare.csv");
  CHECK(table.rfind("model,runs,mean_rand,sd_rand", 0) == 0);
  for (const char* row : {"lda_eda,2,", "lda_rri,2,", "mlda,2,", "mmlda,2,", "chance,2,",
                          "chance_sized,2,"})
    CHECK(table.find(row) != std::string::npos);

  REQUIRE(run_cli("report --config " + cfg) == 0);
  std::string report = slurp(out / "report.txt");
  for (const char* section : {"diagnostics.csv", "eval_summary.csv", "compare.csv"})
    CHECK(report.find(section) != std::string::npos);

  // identical rerun reproduces the corpus and model bytes
  std::string corpus_bytes = slurp(out / "corpus.json");
  std::string model_bytes = slurp(out / "model.json");
  REQUIRE(run_cli("synth --config " + cfg) == 0);
  REQUIRE(run_cli("train --config " + cfg) == 0);
  CHECK(slurp(out / "corpus.json") == corpus_bytes);
  CHECK(slurp(out / "model.json") == model_bytes);

  // a different seed changes the sampled corpus
  REQUIRE(run_cli("synth --config " + cfg + " --seed 6") == 0);
  CHECK(slurp(out / "corpus.json") != corpus_bytes);
}

TEST_CASE("cli: category-count overrides are validated") {
  fs::path dir = cli_dir();
  fs::path out = dir / "run_k";
  fs::remove_all(out);
  std::string cfg = pipeline_config(out, 7).string();
  REQUIRE(run_cli("synth --config " + cfg) == 0);
  REQUIRE(run_cli("train --config " + cfg + " --k V=4") == 0);
  CHECK(slurp(out / "model.json").find("\"k\": 4") != std::string::npos);

  CHECK(run_cli("train --config " + cfg + " --k V") == 2);    // missing value
  CHECK(run_cli("train --config " + cfg + " --k V=0") == 2);  // below one
  CHECK(run_cli("train --config " + cfg + " --k Z=3") == 2);  // unknown concept
  CHECK(captured_stderr().find("unknown concept") != std::string::npos);
}

TEST_CASE("cli: report with no artifacts exits with status two") {
  fs::path dir = cli_dir();
  fs::path out = dir / "run_none";
  fs::remove_all(out);
  std::string cfg = pipeline_config(out, 9).string();
  CHECK(run_cli("report --config " + cfg) == 2);
}
