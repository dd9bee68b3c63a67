// End-to-end exercise of the command-line interface: synth -> train ->
// stream -> eval -> sweep, plus exit codes and reproducibility of artifacts.

#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "dabn/data.hpp"
#include "dabn/hash.hpp"
#include "test_util.hpp"

namespace {

struct CmdResult {
  int exit_code = -1;
  std::string stdout_text;
};

CmdResult run(const std::string& args, const std::string& workdir) {
  const std::string out_file = workdir + "/cmd_stdout.txt";
  const std::string cmd = std::string(DABN_CLI_PATH) + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  CmdResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out_file);
  std::ostringstream os;
  os << in.rdbuf();
  r.stdout_text = os.str();
  return r;
}

std::string last_line(const std::string& text) {
  std::istringstream in(text);
  std::string line, last;
  while (std::getline(in, line))
    if (!line.empty()) last = line;
  return last;
}

void write_synth_spec(const std::string& path) {
  std::ofstream out(path);
  out << R"({
  "num_users": 3,
  "classes": 3,
  "windows_per_class": 30,
  "window_len": 40,
  "noise_sigma": 0.05,
  "seed": 99,
  "users": [
    {"offset": [0.0, 0.0, 0.0], "scale": [1.0, 1.0, 1.0]},
    {"offset": [0.25, -0.2, 0.1], "scale": [1.1, 0.95, 1.05]},
    {"offset": [1.2, 0.96, 1.32], "scale": [1.3, 0.769, 1.17]}
  ]
})";
}

const char* kTinyNet =
    "--conv-layers 1 --feature-maps 6 --kernel 5 --pool 4 --dense-width 16 --dropout 0.2 "
    "--lr 3e-3 --decay 1e-3 --epochs 15 --batch-size 20 --seed 7";

}  // namespace

TEST(Cli, FullPipelineSynthTrainStreamEval) {
  testutil::TempDir dir("cli_full");
  write_synth_spec(dir.file("spec.json"));

  // synth
  auto r = run("synth --spec " + dir.file("spec.json") + " --out " + dir.file("synth"), dir.str());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  EXPECT_NE(r.stdout_text.find("windows: 270"), std::string::npos) << r.stdout_text;
  const std::string cache = dir.file("synth") + "/dataset.dads";

  // train, excluding the shifted target
  r = run("train --data " + cache + " --out " + dir.file("train") + " --exclude-subject u2 " +
              kTinyNet,
          dir.str());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  const std::string ckpt = dir.file("train") + "/model.dabn";
  EXPECT_TRUE(std::filesystem::exists(ckpt));
  EXPECT_TRUE(std::filesystem::exists(dir.file("train") + "/loss.csv"));

  // stream with adaptation on vs off
  r = run("stream --model " + ckpt + " --data " + cache +
              " --target u2 --momentum 0.05 --order shuffled --seed 3 --out " +
              dir.file("stream_on"),
          dir.str());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  const double acc_on = std::stod(last_line(r.stdout_text));

  r = run("stream --model " + ckpt + " --data " + cache +
              " --target u2 --momentum 0.05 --order shuffled --seed 3 --adaptation off --out " +
              dir.file("stream_off"),
          dir.str());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  const double acc_off = std::stod(last_line(r.stdout_text));
  EXPECT_GT(acc_on, acc_off);

  // stream csv row count equals window count
  std::ifstream csv(dir.file("stream_on") + "/stream.csv");
  std::string line;
  std::getline(csv, line);
  EXPECT_EQ(line.rfind("tau,predicted,true_label_if_known", 0), 0u);
  std::size_t rows = 0;
  while (std::getline(csv, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 90u);

  // eval lower baseline, then online-randomized against it
  r = run("eval --data " + cache + " --kind lower-baseline --run-id base --out " +
              dir.file("runs") + " --threads 3 " + kTinyNet,
          dir.str());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  EXPECT_TRUE(std::filesystem::exists(dir.file("runs") + "/base/folds.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir.file("runs") + "/base/summary.csv"));
  EXPECT_TRUE(std::filesystem::exists(dir.file("runs") + "/base/manifest.json"));

  r = run("eval --data " + cache +
              " --kind online-randomized --momentum 0.05 --repeats 2 --run-id online "
              "--baseline " +
              dir.file("runs") + "/base --out " + dir.file("runs") + " --threads 3 " + kTinyNet,
          dir.str());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;

  // deltas over the baseline are present in the summary
  std::ifstream summary(dir.file("runs") + "/online/summary.csv");
  bool has_delta = false;
  while (std::getline(summary, line))
    if (line.rfind("delta,", 0) == 0) has_delta = true;
  EXPECT_TRUE(has_delta);

  // sweep reuses the fold cache
  r = run("sweep --data " + cache +
              " --kind online-randomized --momenta 0.02,0.1 --repeats 2 --run-id sw --out " +
              dir.file("runs") + " --threads 3 " + kTinyNet,
          dir.str());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  std::ifstream sweep_csv(dir.file("runs") + "/sw/sweep.csv");
  std::getline(sweep_csv, line);
  EXPECT_EQ(line, "momentum,median,mean");
  rows = 0;
  while (std::getline(sweep_csv, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 2u);

  // pre-estimation-fraction sweep over the batch kind
  r = run("sweep --data " + cache +
              " --kind unsupervised-batch --fractions 0.1,0.3 --run-id swf --out " +
              dir.file("runs") + " --threads 3 " + kTinyNet,
          dir.str());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  std::ifstream frac_csv(dir.file("runs") + "/swf/sweep.csv");
  std::getline(frac_csv, line);
  EXPECT_EQ(line, "pre_fraction,median,mean");
  rows = 0;
  while (std::getline(frac_csv, line))
    if (!line.empty()) ++rows;
  EXPECT_EQ(rows, 2u);
}

TEST(Cli, PreprocessIngestsCsvAndReportsCounts) {
  testutil::TempDir dir("cli_pre");
  {
    std::ofstream out(dir.file("raw.csv"));
    out << "subject,activity,timestamp_ns,x,y,z\n";
    dabn::Rng rng(5);
    for (const char* subj : {"s1", "s2"})
      for (const char* act : {"walk", "jog"})
        for (int i = 0; i < 120; ++i) {
          char buf[160];
          std::snprintf(buf, sizeof(buf), "%s,%s,%lld,%.6f,%.6f,%.6f\n", subj, act,
                        static_cast<long long>(i) * 50'000'000ll, rng.uniform(-20, 20),
                        rng.uniform(-20, 20), rng.uniform(-20, 20));
          out << buf;
        }
    out << "s1,walk,bogus,1,2,3\n";  // malformed row
  }
  const auto r =
      run("preprocess --input " + dir.file("raw.csv") + " --out " + dir.file("pre"), dir.str());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  EXPECT_NE(r.stdout_text.find("malformed_rows: 1"), std::string::npos);
  // 120 samples per series -> (120-40)/20+1 = 5 windows, 4 series
  EXPECT_NE(r.stdout_text.find("windows: 20"), std::string::npos);
  const dabn::Dataset ds = dabn::load_dataset(dir.file("pre") + "/dataset.dads");
  EXPECT_EQ(ds.pipeline, "resample20hz|mavg4|minmax[-78,78]|win40s20");
}

TEST(Cli, ConfigFilePrecedence) {
  testutil::TempDir dir("cli_cfg");
  write_synth_spec(dir.file("spec.json"));
  {
    std::ofstream out(dir.file("cfg.json"));
    out << R"({"epochs": 4, "batch-size": 20, "lr": 3e-3, "dropout": 0.2,
               "conv-layers": 1, "feature-maps": 6, "dense-width": 16, "seed": 7})";
  }
  auto r = run("synth --spec " + dir.file("spec.json") + " --out " + dir.file("synth"), dir.str());
  ASSERT_EQ(r.exit_code, 0);
  const std::string cache = dir.file("synth") + "/dataset.dads";

  // config supplies the hyper parameters; the flag overrides epochs
  r = run("--config " + dir.file("cfg.json") + " train --data " + cache + " --out " +
              dir.file("t1") + " --epochs 2",
          dir.str());
  ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  std::ifstream cfg(dir.file("t1") + "/config.json");
  nlohmann::json resolved;
  cfg >> resolved;
  EXPECT_EQ(resolved["hyper"]["epochs"].get<int>(), 2);        // flag wins
  EXPECT_EQ(resolved["hyper"]["batch-size"].get<int>(), 20);   // config wins
  EXPECT_EQ(resolved["arch"]["dense-width"].get<int>(), 16);   // config wins
  EXPECT_DOUBLE_EQ(resolved["hyper"]["lr"].get<double>(), 3e-3);
}

TEST(Cli, ReproducibleArtifacts) {
  testutil::TempDir dir("cli_repro");
  write_synth_spec(dir.file("spec.json"));
  for (const char* tag : {"a", "b"}) {
    auto r = run("synth --spec " + dir.file("spec.json") + " --out " + dir.file(tag), dir.str());
    ASSERT_EQ(r.exit_code, 0);
  }
  EXPECT_EQ(dabn::hash_file(dir.file("a") + "/dataset.dads"),
            dabn::hash_file(dir.file("b") + "/dataset.dads"));

  for (const char* tag : {"ta", "tb"}) {
    auto r = run("train --data " + dir.file("a") + "/dataset.dads --out " + dir.file(tag) + " " +
                     std::string(kTinyNet) + " --epochs 3",
                 dir.str());
    ASSERT_EQ(r.exit_code, 0);
  }
  EXPECT_EQ(dabn::hash_file(dir.file("ta") + "/model.dabn"),
            dabn::hash_file(dir.file("tb") + "/model.dabn"));
}

TEST(Cli, TrainDefaultsMatchPublishedSetup) {
  testutil::TempDir dir("cli_defaults");
  const auto r = run("train --help", dir.str());
  ASSERT_EQ(r.exit_code, 0);
  // lr 1e-4, decay 1e-3, 649 epochs, batches of 177
  EXPECT_NE(r.stdout_text.find("0.0001"), std::string::npos) << r.stdout_text;
  EXPECT_NE(r.stdout_text.find("0.001"), std::string::npos);
  EXPECT_NE(r.stdout_text.find("649"), std::string::npos);
  EXPECT_NE(r.stdout_text.find("177"), std::string::npos);
  // architecture defaults: 5 conv layers, 64 maps, kernel 5, pool 4, dense 256
  EXPECT_NE(r.stdout_text.find("64"), std::string::npos);
  EXPECT_NE(r.stdout_text.find("256"), std::string::npos);
}

TEST(Cli, PreprocessRerunIsByteIdentical) {
  testutil::TempDir dir("cli_pre_repro");
  {
    std::ofstream out(dir.file("raw.csv"));
    dabn::Rng rng(6);
    for (int i = 0; i < 150; ++i) {
      char buf[160];
      std::snprintf(buf, sizeof(buf), "s1,walk,%lld,%.6f,%.6f,%.6f\n",
                    static_cast<long long>(i) * 49'500'000ll, rng.uniform(-30, 30),
                    rng.uniform(-30, 30), rng.uniform(-30, 30));
      out << buf;
    }
  }
  for (const char* tag : {"p1", "p2"}) {
    const auto r =
        run("preprocess --input " + dir.file("raw.csv") + " --out " + dir.file(tag), dir.str());
    ASSERT_EQ(r.exit_code, 0) << r.stdout_text;
  }
  EXPECT_EQ(dabn::hash_file(dir.file("p1") + "/dataset.dads"),
            dabn::hash_file(dir.file("p2") + "/dataset.dads"));
}

TEST(Cli, ExitCodes) {
  testutil::TempDir dir("cli_exit");
  // usage error: unknown flag
  auto r = run("train --bogus-flag 1", dir.str());
  EXPECT_EQ(r.exit_code, 1);
  // usage error: missing required option
  r = run("train", dir.str());
  EXPECT_EQ(r.exit_code, 1);
  // data error: missing input file
  r = run("train --data " + dir.file("absent.dads") + " --out " + dir.file("out"), dir.str());
  EXPECT_EQ(r.exit_code, 2);
  // data error: malformed dataset cache
  {
    std::ofstream out(dir.file("garbage.dads"));
    out << "not a cache";
  }
  r = run("train --data " + dir.file("garbage.dads") + " --out " + dir.file("out"), dir.str());
  EXPECT_EQ(r.exit_code, 2);
  // help exits 0
  r = run("--help", dir.str());
  EXPECT_EQ(r.exit_code, 0);
}
