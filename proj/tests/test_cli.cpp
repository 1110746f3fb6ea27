// Copyright 2026 The irec Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include <sys/wait.h>

#include <gtest/gtest.h>

namespace {

namespace fs = std::filesystem;

const std::string kCli = IREC_CLI_PATH;

std::string tmp(const std::string& name) {
  const fs::path dir = fs::path(IREC_TEST_TMPDIR) / "cli";
  fs::create_directories(dir);
  return (dir / name).string();
}

struct Run {
  int code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Run run(const std::string& args) {
  const std::string out = tmp("stdout.txt"), err = tmp("stderr.txt");
  const std::string cmd = "'" + kCli + "' " + args + " >'" + out + "' 2>'" + err + "'";
  const int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = slurp(out);
  r.err = slurp(err);
  return r;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    model_ = tmp("model.lgm");
    image_ = tmp("image.pgm");
    ASSERT_EQ(run("fit --synthetic 8 --synthetic-size 64 --latent 16 --seed 3 --out '" + model_ + "'").code, 0);
    ASSERT_EQ(run("synth --width 40 --height 24 --seed 5 --model '" + model_ + "' --out '" + image_ + "'").code, 0);
  }
  static std::string model_, image_;
};

std::string Cli::model_, Cli::image_;

TEST_F(Cli, LosslessRoundTripIsByteIdentical) {
  const auto c = run("compress --mode lossless --model '" + model_ + "' --in '" + image_ +
                     "' --out '" + tmp("a.irec") + "' --seed 9");
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(c.out.find("\"bpp\""), std::string::npos);
  EXPECT_NE(c.out.find("\"beams\":20"), std::string::npos);
  EXPECT_NE(c.out.find("\"epsilon\":0.2"), std::string::npos);
  EXPECT_NE(c.out.find("\"omega\":3.0"), std::string::npos);
  const auto d = run("decompress --model '" + model_ + "' --in '" + tmp("a.irec") + "' --out '" +
                     tmp("a.pgm") + "'");
  ASSERT_EQ(d.code, 0) << d.err;
  EXPECT_EQ(slurp(tmp("a.pgm")), slurp(image_));
}

TEST_F(Cli, LossyUsesLossyDefaults) {
  const auto c = run("compress --mode lossy --model '" + model_ + "' --in '" + image_ +
                     "' --out '" + tmp("b.irec") + "'");
  ASSERT_EQ(c.code, 0) << c.err;
  EXPECT_NE(c.out.find("\"beams\":10"), std::string::npos);
  EXPECT_NE(c.out.find("\"epsilon\":0.0"), std::string::npos);
  EXPECT_EQ(run("decompress --mode lossy --model '" + model_ + "' --in '" + tmp("b.irec") +
                "' --out '" + tmp("b.pgm") + "'").code, 0);
  // A lossy container cannot satisfy a lossless decode request.
  EXPECT_EQ(run("decompress --mode lossless --model '" + model_ + "' --in '" + tmp("b.irec") +
                "' --out '" + tmp("b2.pgm") + "'").code, 3);
}

TEST_F(Cli, UsageErrors) {
  const auto r = run("compress --in '" + image_ + "' --out '" + tmp("x.irec") + "'");
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("--model"), std::string::npos);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run("").code, 1);
  EXPECT_EQ(run("frobnicate").code, 1);
  EXPECT_EQ(run("compress --mode sideways --model '" + model_ + "' --in '" + image_ + "' --out '" +
                tmp("x.irec") + "'").code, 1);
  EXPECT_EQ(run("compress --beams 0 --model '" + model_ + "' --in '" + image_ + "' --out '" +
                tmp("x.irec") + "'").code, 1);
}

TEST_F(Cli, IoFormatAndMismatchExitCodes) {
  EXPECT_EQ(run("compress --model '" + model_ + "' --in /nonexistent/in.pgm --out '" +
                tmp("x.irec") + "'").code, 2);
  {
    std::ofstream junk(tmp("junk.irec"), std::ios::binary);
    junk << "XREC and then some bytes that are not a container at all..........................";
  }
  EXPECT_EQ(run("decompress --model '" + model_ + "' --in '" + tmp("junk.irec") + "' --out '" +
                tmp("x.pgm") + "'").code, 3);

  ASSERT_EQ(run("compress --model '" + model_ + "' --in '" + image_ + "' --out '" +
                tmp("m.irec") + "'").code, 0);
  const std::string other = tmp("other.lgm");
  ASSERT_EQ(run("fit --synthetic 8 --synthetic-size 64 --latent 16 --seed 4 --out '" + other + "'").code, 0);
  EXPECT_EQ(run("decompress --model '" + other + "' --in '" + tmp("m.irec") + "' --out '" +
                tmp("x.pgm") + "'").code, 4);
}

TEST_F(Cli, StudiesEmitCsv) {
  const auto b = run("bias-study --beams 1,2 --kl 10 --dims 4 --trials 30 --seed 1");
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(b.out.substr(0, b.out.find('\n')), "beams,mean_log_ratio,stderr,kl");
  EXPECT_EQ(b.out, run("bias-study --beams 1,2 --kl 10 --dims 4 --trials 30 --seed 1").out);
  EXPECT_EQ(run("bias-study --trials 5").code, 1);

  const auto s = run("sweep --omega-grid 3 --beam-grid 1,5 --trials 30 --kl 10 --dims 4 --out '" +
                     tmp("sweep.csv") + "'");
  ASSERT_EQ(s.code, 0) << s.err;
  const std::string csv = slurp(tmp("sweep.csv"));
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "omega,epsilon,beams,overhead_ratio,seconds,failures");
  EXPECT_EQ(run("sweep --image '" + image_ + "' --trials 30").code, 1);
}

TEST_F(Cli, ValidateQuickAndMutations) {
  const auto v = run("validate --quick --histogram-csv '" + tmp("hist.csv") + "'");
  EXPECT_NE(v.out.find("PASS chain-kl-identity"), std::string::npos) << v.out;
  EXPECT_NE(v.out.find("PASS conditional-moments"), std::string::npos) << v.out;
  EXPECT_NE(v.out.find("PASS stochastic-ks"), std::string::npos) << v.out;
  EXPECT_NE(v.out.find("PASS determinism"), std::string::npos) << v.out;
  EXPECT_NE(v.out.find("step-kl-histogram"), std::string::npos) << v.out;
  EXPECT_EQ(v.code, v.out.find("FAIL") == std::string::npos ? 0 : 5);
  const std::string hist = slurp(tmp("hist.csv"));
  EXPECT_EQ(hist.substr(0, hist.find('\n')), "bin_lo,bin_hi,count");

  const auto tie = run("validate --quick --tie-break largest");
  EXPECT_EQ(tie.code, 5);
  EXPECT_NE(tie.out.find("FAIL determinism"), std::string::npos);

  const auto exp = run("validate --quick --schedule-exponent 0.5");
  EXPECT_EQ(exp.code, 5);
  EXPECT_NE(exp.out.find("FAIL step-kl-histogram"), std::string::npos);

  EXPECT_EQ(run("validate --tie-break sideways").code, 1);
}

}  // namespace
