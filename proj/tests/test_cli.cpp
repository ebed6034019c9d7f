#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include "msplat/checkpoint.hpp"
#include "msplat/image_io.hpp"
#include "msplat/ply.hpp"

using namespace msplat;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code = -1;
    std::string err;
};

const fs::path& scratch() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / ("msplat_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

Result run(const std::string& args) {
    const fs::path err = scratch() / "stderr.txt";
    const std::string cmd = std::string(MSPLAT_CLI_PATH) + " " + args + " > /dev/null 2> " + err.string();
    const int status = std::system(cmd.c_str());
    Result r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    r.err = slurp(err);
    return r;
}

}  // namespace

TEST_CASE("usage errors exit with 2") {
    const Result unknown = run("frobnicate");
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("\"error\":\"usage\"") != std::string::npos);
    CHECK(run("").code == 2);
    CHECK(run("train --data x.json").code == 2);  // missing --out
    CHECK(run("--help").code == 0);
}

TEST_CASE("end-to-end: synth, train, eval, render, export, animate") {
    const fs::path d = scratch();
    const std::string data = (d / "data" / "manifest.json").string();

    REQUIRE(run("synth --out " + (d / "data").string() + " --poses 3 --test-poses 1 --size 32 --rings 3 --radial 6")
                .code == 0);
    REQUIRE(fs::exists(data));

    std::ofstream(d / "cfg.json") << R"({"schedule": {"total_iters": 20, "density_control_end": 20}, "log_interval": 5})";
    REQUIRE(run("--deterministic train --config " + (d / "cfg.json").string() + " --data " + data + " --out " +
                (d / "run").string())
                .code == 0);
    const fs::path ckpt = d / "run" / "checkpoint.rmav";
    REQUIRE(fs::exists(ckpt));
    CHECK(load_checkpoint(ckpt).iteration == 20);
    CHECK(fs::exists(d / "run" / "train_log.csv"));

    SUBCASE("--iters overrides the schedule") {
        REQUIRE(run("--deterministic train --iters 7 --data " + data + " --out " + (d / "run7").string()).code == 0);
        CHECK(load_checkpoint(d / "run7" / "checkpoint.rmav").iteration == 7);
    }
    SUBCASE("eval writes per-frame rows and a mean") {
        REQUIRE(run("eval --checkpoint " + ckpt.string() + " --data " + data + " --split test --out " +
                    (d / "eval.csv").string())
                    .code == 0);
        std::istringstream csv(slurp(d / "eval.csv"));
        std::string line;
        std::vector<std::string> lines;
        while (std::getline(csv, line)) {
            lines.push_back(line);
        }
        REQUIRE(lines.size() == 3);
        CHECK(lines[0] == "frame,image,psnr,ssim");
        CHECK(lines[2].rfind("mean,", 0) == 0);
    }
    SUBCASE("render a manifest frame") {
        const fs::path out = d / "frame.png";
        const fs::path raw = d / "frame.msfr";
        REQUIRE(run("render --checkpoint " + ckpt.string() + " --data " + data + " --frame 1 --out " + out.string() +
                    " --raw " + raw.string())
                    .code == 0);
        const Image img = read_png(out);
        CHECK(img.width == 32);
        CHECK(img.height == 32);
        CHECK(quantize8(read_raw(raw)) == img);
    }
    SUBCASE("an out-of-range frame exits with 1 and a JSON error") {
        const Result r =
            run("render --checkpoint " + ckpt.string() + " --data " + data + " --frame 99 --out " + (d / "x.png").string());
        CHECK(r.code == 1);
        CHECK(r.err.find("\"error\":\"range\"") != std::string::npos);
        CHECK_FALSE(fs::exists(d / "x.png"));
    }
    SUBCASE("a missing checkpoint exits with 1") {
        const Result r = run("render --checkpoint " + (d / "nope.rmav").string() + " --data " + data +
                             " --frame 0 --out " + (d / "y.png").string());
        CHECK(r.code == 1);
        CHECK(r.err.find("\"error\":\"io\"") != std::string::npos);
    }
    SUBCASE("export-ply in both encodings") {
        const Checkpoint c = load_checkpoint(ckpt);
        for (const char* flag : {"", " --ascii"}) {
            const fs::path out = d / "cloud.ply";
            REQUIRE(run("export-ply --checkpoint " + ckpt.string() + " --data " + data + " --frame 0 --out " +
                        out.string() + flag)
                        .code == 0);
            const PlyCloud cloud = read_ply(out);
            CHECK(cloud.splats.size() == c.splats.size());
            CHECK(cloud.sh_degree == c.splats.sh_degree);
        }
    }
    SUBCASE("animate renders one frame per pose") {
        std::ofstream(d / "poses.json") << R"([
            {"root_translation": [0, 0, 0], "joint_rotations": [[0, 0, 0], [0, 0, 0.2]]},
            {"root_translation": [0, 0, 0], "joint_rotations": [[0, 0, 0], [0, 0, 0.4]]},
            {"root_translation": [0.1, 0, 0], "joint_rotations": [[0, 0, 0], [0.1, 0, 0.4]]}])";
        REQUIRE(run("animate --checkpoint " + ckpt.string() + " --poses " + (d / "poses.json").string() +
                    " --data " + data + " --out " + (d / "anim").string())
                    .code == 0);
        std::size_t pngs = 0;
        for (const auto& e : fs::directory_iterator(d / "anim")) {
            pngs += e.path().extension() == ".png" ? 1 : 0;
        }
        CHECK(pngs == 3);
    }
    SUBCASE("deterministic runs produce identical files") {
        REQUIRE(run("--deterministic train --config " + (d / "cfg.json").string() + " --data " + data + " --out " +
                    (d / "run_b").string())
                    .code == 0);
        CHECK(slurp(ckpt) == slurp(d / "run_b" / "checkpoint.rmav"));
        CHECK(slurp(d / "run" / "train_log.csv") == slurp(d / "run_b" / "train_log.csv"));
    }
}

TEST_CASE("cleanup") {
    fs::remove_all(scratch());
}
