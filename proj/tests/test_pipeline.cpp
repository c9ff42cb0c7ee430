#include "helpers.hpp"

#include "lensdeg/error.hpp"
#include "lensdeg/pipeline.hpp"

#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

using namespace lensdeg;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void write_text(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

fs::path small_config(const fs::path& dir, const std::string& out, const std::string& extra = "") {
    const fs::path cfg = dir / "config.json";
    write_text(cfg, R"({
  "prescription": ")" + data_path("doublet.lens") + R"(",
  "psf_grid": [2, 2],
  "grid": [2, 2],
  "cell_px": 32,
  "pupil_samples": 16,
  "chart": {"width": 480, "height": 288, "blur_sigma_px": 0.8},)" + extra + R"(
  "annuli": "default",
  "output_dir": ")" + out + R"("
})");
    return cfg;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(LENSDEG_CLI) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("sha256 of a known string") {
    const fs::path dir = fresh_dir("sha");
    write_text(dir / "abc", "abc");
    CHECK(sha256_hex(dir / "abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK_THROWS_AS(sha256_hex(dir / "missing"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("config validation") {
    const fs::path dir = fresh_dir("config");
    const PipelineConfig ok = load_pipeline_config(small_config(dir, "out"));
    CHECK(ok.psf_rows == 2);
    CHECK(ok.chart_width == 480);
    CHECK(ok.annuli_default);
    CHECK(ok.output_dir == dir / "out");

    CHECK_NOTHROW(ok.validate());
    CHECK_THROWS_AS(load_pipeline_config(small_config(dir, "out", R"( "colour": true,)")), ValidationError);
    CHECK_THROWS_AS(load_pipeline_config(small_config(dir, "out", R"( "boundary": "wrap",)")), ValidationError);
    CHECK_THROWS_AS(load_pipeline_config(small_config(dir, "out", R"( "grid": [5, 7],)")).validate(), ValidationError);
    write_text(dir / "noannuli.json", R"({"prescription": ")" + data_path("doublet.lens") + R"("})");
    CHECK_THROWS_AS(load_pipeline_config(dir / "noannuli.json").validate(), ValidationError);
    write_text(dir / "broken.json", "{");
    CHECK_THROWS_AS(load_pipeline_config(dir / "broken.json"), ValidationError);
    CHECK_THROWS_AS(load_pipeline_config(dir / "absent.json"), IoError);
    fs::remove_all(dir);
}

TEST_CASE("pipeline runs are reproducible and the manifest is honest") {
    const fs::path dir = fresh_dir("pipeline");
    const PipelineConfig a = load_pipeline_config(small_config(dir, "run_a"));
    PipelineConfig b = a;
    b.output_dir = dir / "run_b";
    const Manifest ma = run_pipeline(a);
    const Manifest mb = run_pipeline(b);
    CHECK(ma.to_json() == mb.to_json());
    CHECK(slurp(dir / "run_a" / "manifest.json") == slurp(dir / "run_b" / "manifest.json"));
    REQUIRE_FALSE(ma.entries.empty());
    bool saw_degraded = false, saw_report = false;
    for (const ManifestEntry& e : ma.entries) {
        const fs::path f = dir / "run_a" / e.path;
        REQUIRE(fs::exists(f));
        CHECK(sha256_hex(f) == e.sha256);
        CHECK(fs::file_size(f) == e.bytes);
        CHECK(slurp(f) == slurp(dir / "run_b" / e.path));
        saw_degraded |= e.path.rfind("degraded_", 0) == 0;
        saw_report |= e.path.rfind("report_", 0) == 0;
    }
    CHECK(saw_degraded);
    CHECK(saw_report);
    fs::remove_all(dir);
}

TEST_CASE("stage failures name the stage") {
    const fs::path dir = fresh_dir("stage");
    PipelineConfig cfg = load_pipeline_config(small_config(dir, "out"));
    cfg.fov_deg = 60.0;
    try {
        run_pipeline(cfg);
        FAIL("expected a numeric error");
    } catch (const Error& e) {
        CHECK(e.category() == Error::Category::numeric);
        CHECK(std::string(e.what()).find("stage 'psf-grid'") != std::string::npos);
    }
    fs::remove_all(dir);
}

TEST_CASE("command line exit codes") {
    const fs::path dir = fresh_dir("cli");
    const std::string lens = "--lens " + data_path("doublet.lens");
    CHECK(run_cli("paraxial " + lens) == 0);
    CHECK(run_cli("paraxial --json " + lens) == 0);
    CHECK(run_cli("trace " + lens + " --samples 4 --out " + (dir / "t.csv").string()) == 0);
    CHECK(slurp(dir / "t.csv").rfind("ray_id,surface,x,y,z,L,M,N,opl,status", 0) == 0);
    CHECK(run_cli("psf " + lens + " --pupil 32 --size 32 --out " + (dir / "p").string()) == 0);
    CHECK(run_cli("compare --a " + (dir / "p").string() + " --b " + (dir / "p.bin").string()) == 0);

    CHECK(run_cli("trace --bogus") == 2);
    CHECK(run_cli("psf-grid " + lens + " --grid 3 --out " + (dir / "g").string()) == 2);
    CHECK(run_cli("psf-grid " + lens + " --grid 1x2 --fov 60 --cell 32 --pupil 16 --out " + (dir / "g").string()) == 3);
    CHECK(run_cli("paraxial --lens " + (dir / "none.lens").string()) == 4);
    CHECK(run_cli("compare --a " + (dir / "p").string() + " --b " + (dir / "nothing").string()) == 4);

    // An empty report still plots, with a visible warning instead of bars.
    const RasterImage blank(64, 48, 0.5f);
    write_text(dir / "empty.json", region_report(blank, blank, {}, AnnulusPartition::for_image(64, 48)).to_json());
    CHECK(run_cli("plot --report " + (dir / "empty.json").string() + " --out " + (dir / "empty.png").string()) == 0);
    CHECK(fs::exists(dir / "empty.png"));
    fs::remove_all(dir);
}

}  // TEST_SUITE
