// End-to-end checks of the command-line contract: artifacts, exit codes,
// and byte-level determinism. The binary under test comes from CIMLE_BIN.

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "cimle/config.hpp"
#include "cimle/generator.hpp"
#include "cimle/serialize.hpp"

namespace fs = std::filesystem;
using namespace cimle;

TEST_SUITE_BEGIN("cli");

namespace {

std::string bin() {
    const char* b = std::getenv("CIMLE_BIN");
    REQUIRE_MESSAGE(b != nullptr, "CIMLE_BIN must point at the cimle binary");
    return b;
}

int run(const std::string& args) {
    const std::string cmd = bin() + " " + args + " >/dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    REQUIRE(rc != -1);
    return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
    std::ifstream is(p, std::ios::binary);
    REQUIRE_MESSAGE(is.good(), ("missing file: " + p.string()));
    std::stringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

fs::path fresh_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("cimle_cli_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

const std::string kBaseConfig =
    "task = layout\n"
    "seed = 7\n"
    "epochs = 4\n"
    "batch_size = 6\n"
    "samples_per_example = 3\n"
    "inner_steps = 4\n"
    "inner_batch_size = 2\n"
    "learning_rate = 0.01\n"
    "distance = perceptual\n"
    "rebalance = off\n"
    "noise_channels = 4\n"
    "seed_dim = 2\n"
    "hidden = 4\n"
    "encoder_hidden = 3,3\n"
    "refine_scales = 2\n"
    "layout.height = 8\n"
    "layout.width = 16\n"
    "layout.num_classes = 3\n"
    "layout.num_layouts = 3\n"
    "layout.images_per_layout = 6\n"
    "checkpoint_every = 2\n";

fs::path write_config(const fs::path& dir, const std::string& extra = "") {
    const fs::path p = dir / "exp.cfg";
    std::ofstream os(p);
    os << kBaseConfig << extra;
    return p;
}

} // namespace

TEST_CASE("train writes the full artifact set and is byte-deterministic") {
    const fs::path dir = fresh_dir("train");
    const fs::path cfg = write_config(dir);
    const fs::path run1 = dir / "run1";
    const fs::path run2 = dir / "run2";

    CHECK(run("train --config " + cfg.string() + " --out " + run1.string()) == 0);
    CHECK(fs::exists(run1 / "log.csv"));
    CHECK(fs::exists(run1 / "checkpoint.ckpt"));
    CHECK(fs::exists(run1 / "checkpoint_epoch000002.ckpt"));
    CHECK(fs::exists(run1 / "checkpoint_epoch000004.ckpt"));
    CHECK(fs::exists(run1 / "config.resolved"));
    CHECK(fs::exists(run1 / "dataset.bin"));
    CHECK(fs::exists(run1 / "metadata.csv"));
    CHECK(fs::exists(run1 / "layouts" / "layout_000.bin"));

    const std::string log = slurp(run1 / "log.csv");
    CHECK(log.rfind("epoch,mean_matched_distance\n", 0) == 0);

    CHECK(run("train --config " + cfg.string() + " --out " + run2.string()) == 0);
    CHECK(slurp(run2 / "log.csv") == log);
    CHECK(slurp(run2 / "checkpoint.ckpt") == slurp(run1 / "checkpoint.ckpt"));
}

TEST_CASE("train exit codes: bad values and unknown keys are config errors") {
    const fs::path dir = fresh_dir("train_bad");
    {
        std::ofstream os(dir / "bad_eta.cfg");
        os << kBaseConfig << "learning_rate = 0\n";
    }
    CHECK(run("train --config " + (dir / "bad_eta.cfg").string()) == 2);

    {
        std::ofstream os(dir / "unknown.cfg");
        os << kBaseConfig << "mystery_knob = 3\n";
    }
    CHECK(run("train --config " + (dir / "unknown.cfg").string()) == 2);

    CHECK(run("train --config " + (dir / "missing.cfg").string()) == 2);
}

TEST_CASE("snapshot alone reproduces the run") {
    const fs::path dir = fresh_dir("snapshot");
    const fs::path cfg = write_config(dir);
    const fs::path run1 = dir / "a";
    const fs::path run2 = dir / "b";
    CHECK(run("train --config " + cfg.string() + " --out " + run1.string()) == 0);
    CHECK(run("train --config " + (run1 / "config.resolved").string() + " --out " +
              run2.string()) == 0);
    CHECK(slurp(run2 / "log.csv") == slurp(run1 / "log.csv"));
    CHECK(slurp(run2 / "checkpoint.ckpt") == slurp(run1 / "checkpoint.ckpt"));
}

TEST_CASE("sample: grid convention, determinism, empty request, corruption") {
    const fs::path dir = fresh_dir("sample");
    const fs::path cfg = write_config(dir);
    const fs::path run1 = dir / "run";
    REQUIRE(run("train --config " + cfg.string() + " --out " + run1.string()) == 0);
    const std::string ckpt = (run1 / "checkpoint.ckpt").string();
    const std::string layout = (run1 / "layouts" / "layout_000.bin").string();

    const fs::path s1 = dir / "s1";
    CHECK(run("sample " + layout + " --checkpoint " + ckpt + " --count 9 --seed 5" +
              " --out " + s1.string()) == 0);
    for (int i = 0; i < 9; ++i) {
        CHECK(fs::exists(s1 / ("sample_00" + std::to_string(i) + ".ppm")));
    }
    CHECK(fs::exists(s1 / "mosaic.ppm"));
    // Nine tiles of 16x8 tile into a 3x3 grid.
    CHECK(slurp(s1 / "mosaic.ppm").rfind("P6\n48 24\n255\n", 0) == 0);

    const fs::path s2 = dir / "s2";
    CHECK(run("sample " + layout + " --checkpoint " + ckpt + " --count 9 --seed 5" +
              " --out " + s2.string()) == 0);
    CHECK(slurp(s2 / "sample_004.ppm") == slurp(s1 / "sample_004.ppm"));
    CHECK(slurp(s2 / "mosaic.ppm") == slurp(s1 / "mosaic.ppm"));

    const fs::path s3 = dir / "s3";
    CHECK(run("sample " + layout + " --checkpoint " + ckpt + " --count 0 --out " +
              s3.string()) == 0);
    CHECK(!fs::exists(s3 / "sample_000.ppm"));
    CHECK(!fs::exists(s3 / "mosaic.ppm"));

    // Flip a byte in the checkpoint payload: CRC must catch it.
    const fs::path broken = dir / "broken.ckpt";
    std::string bytes = slurp(run1 / "checkpoint.ckpt");
    bytes[bytes.size() / 2] ^= 0x40;
    std::ofstream(broken, std::ios::binary).write(bytes.data(), bytes.size());
    CHECK(run("sample " + layout + " --checkpoint " + broken.string() +
              " --count 1 --out " + (dir / "s4").string()) == 4);
}

TEST_CASE("interpolate: frame counts and the endpoint identity") {
    const fs::path dir = fresh_dir("interp");
    const fs::path cfg = write_config(dir);
    const fs::path run1 = dir / "run";
    REQUIRE(run("train --config " + cfg.string() + " --out " + run1.string()) == 0);
    const std::string ckpt = (run1 / "checkpoint.ckpt").string();
    const std::string layout = (run1 / "layouts" / "layout_001.bin").string();

    const fs::path f2 = dir / "f2";
    CHECK(run("interpolate " + layout + " --checkpoint " + ckpt +
              " --seed-a 11 --seed-b 12 --steps 2 --out " + f2.string()) == 0);
    CHECK(fs::exists(f2 / "frame_000.ppm"));
    CHECK(fs::exists(f2 / "frame_001.ppm"));
    CHECK(!fs::exists(f2 / "frame_002.ppm"));

    const fs::path f16 = dir / "f16";
    CHECK(run("interpolate " + layout + " --checkpoint " + ckpt +
              " --seed-a 11 --seed-b 12 --steps 16 --out " + f16.string()) == 0);
    int frames = 0;
    for (const auto& entry : fs::directory_iterator(f16)) {
        (void)entry;
        ++frames;
    }
    CHECK(frames == 16);

    const fs::path s = dir / "s";
    CHECK(run("sample " + layout + " --checkpoint " + ckpt +
              " --count 1 --seed 11 --out " + s.string()) == 0);
    CHECK(slurp(f2 / "frame_000.ppm") == slurp(s / "sample_000.ppm"));
}

TEST_CASE("eval: report schema, zero-weight diversity, missing dataset") {
    const fs::path dir = fresh_dir("eval");
    const fs::path cfg = write_config(dir);
    const fs::path run1 = dir / "run";
    REQUIRE(run("train --config " + cfg.string() + " --out " + run1.string()) == 0);

    const fs::path rep = dir / "rep";
    CHECK(run("eval " + run1.string() + " --pairs 3 --inputs 2 --out " +
              rep.string()) == 0);
    const std::string csv = slurp(rep / "diversity.csv");
    CHECK(csv.rfind("input_index,pairs_per_input,metric_seed,mean_pairwise_distance\n",
                    0) == 0);
    // two inputs plus the global row
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    CHECK(csv.find("global,") != std::string::npos);

    // An all-zero model collapses to one constant image: diversity 0.
    ExperimentConfig loaded =
        ExperimentConfig::parse_file((run1 / "config.resolved").string());
    GeneratorState zero;
    zero.spec = loaded.generator_spec();
    zero.theta.assign(zero.spec.main_param_count(), 0.0);
    zero.theta_e.assign(zero.spec.encoder_param_count(), 0.0);
    const fs::path zpath = dir / "zero.ckpt";
    save_checkpoint(zpath.string(), Checkpoint{zero, 0, {}});
    const fs::path zrep = dir / "zrep";
    CHECK(run("eval " + run1.string() + " --checkpoint " + zpath.string() +
              " --pairs 2 --inputs 2 --out " + zrep.string()) == 0);
    const std::string zcsv = slurp(zrep / "diversity.csv");
    std::istringstream zss(zcsv);
    std::string line;
    std::getline(zss, line); // header
    while (std::getline(zss, line)) {
        CHECK(line.substr(line.rfind(',') + 1) == "0");
    }

    const fs::path empty = dir / "empty_run";
    fs::create_directories(empty);
    CHECK(run("eval " + empty.string() + " --out " + (dir / "r2").string()) == 2);
}

TEST_CASE("eval emits coverage for the gmm task") {
    const fs::path dir = fresh_dir("eval_gmm");
    const fs::path cfgp = dir / "gmm.cfg";
    {
        std::ofstream os(cfgp);
        os << "task = gmm\nseed = 3\nepochs = 2\nbatch_size = 6\n"
              "samples_per_example = 3\ninner_steps = 3\ninner_batch_size = 2\n"
              "learning_rate = 0.01\ndistance = l2\nnoise_channels = 3\n"
              "seed_dim = 2\nhidden = 4\nencoder_hidden = 3,3\nrefine_scales = 1\n"
              "gmm.num_conditions = 2\ngmm.modes_per_condition = 2\n"
              "gmm.samples_per_condition = 6\n";
    }
    const fs::path run1 = dir / "run";
    REQUIRE(run("train --config " + cfgp.string() + " --out " + run1.string()) == 0);
    const fs::path rep = dir / "rep";
    CHECK(run("eval " + run1.string() + " --pairs 2 --samples 16 --out " +
              rep.string()) == 0);
    const std::string csv = slurp(rep / "coverage.csv");
    CHECK(csv.rfind("condition,modes,samples,eps,coverage\n", 0) == 0);
    CHECK(csv.find("mean,") != std::string::npos);

    // Reruns are byte-identical.
    const fs::path rep2 = dir / "rep2";
    CHECK(run("eval " + run1.string() + " --pairs 2 --samples 16 --out " +
              rep2.string()) == 0);
    CHECK(slurp(rep2 / "coverage.csv") == csv);

    // Exact oracle value: a zero-weight model emits the all-zero image,
    // and every generated centre lies far from the origin, so coverage
    // is exactly 0 for every condition.
    ExperimentConfig loaded =
        ExperimentConfig::parse_file((run1 / "config.resolved").string());
    GeneratorState zero;
    zero.spec = loaded.generator_spec();
    zero.theta.assign(zero.spec.main_param_count(), 0.0);
    zero.theta_e.assign(zero.spec.encoder_param_count(), 0.0);
    const fs::path zpath = dir / "zero.ckpt";
    save_checkpoint(zpath.string(), Checkpoint{zero, 0, {}});
    const fs::path zrep = dir / "zrep";
    CHECK(run("eval " + run1.string() + " --checkpoint " + zpath.string() +
              " --samples 8 --out " + zrep.string()) == 0);
    const std::string zcsv = slurp(zrep / "coverage.csv");
    std::istringstream zss(zcsv);
    std::string line;
    std::getline(zss, line);
    while (std::getline(zss, line)) {
        CHECK(line.substr(line.rfind(',') + 1) == "0");
    }
}

TEST_CASE("rebalance-stats: schema, absent categories omitted, empty rejected") {
    const fs::path dir = fresh_dir("stats");

    // One image, 3 declared classes, only classes 0 and 1 present.
    Dataset ds;
    std::vector<std::uint8_t> labels(16, 0);
    for (int j = 8; j < 16; ++j) labels[j] = 1;
    SemanticLayout layout(2, 8, 3, std::move(labels));
    ImageTensor img(2, 8, 3);
    for (double& v : img.data()) v = 0.25;
    ds.push_back({layout, img});
    const fs::path dpath = dir / "tiny.bin";
    save_dataset_file(dpath.string(), ds);

    const fs::path csv_path = dir / "stats.csv";
    CHECK(run("rebalance-stats " + dpath.string() + " --out " + csv_path.string()) ==
          0);
    const std::string csv = slurp(csv_path);
    CHECK(csv.rfind("category,image_index,avg_r,avg_g,avg_b,density,rarity\n", 0) ==
          0);
    CHECK(csv.find("\n0,0,") != std::string::npos);
    CHECK(csv.find("\n1,0,") != std::string::npos);
    CHECK(csv.find("\n2,") == std::string::npos); // absent category: no row

    const fs::path epath = dir / "empty.bin";
    save_dataset_file(epath.string(), Dataset{});
    CHECK(run("rebalance-stats " + epath.string()) == 2);

    CHECK(run("rebalance-stats " + (dir / "nope.bin").string()) == 2);
}

TEST_SUITE_END();
