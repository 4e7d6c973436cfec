#include <catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "cqed/pipeline.hpp"

using Catch::Approx;
using namespace cqed;
using namespace cqed::pipeline;

namespace {

/// Resonance fit with the given Q at wavelength lambda, built directly.
FitResult resonance_fit(double lambda, double q, double rel_err = 0.01) {
    FitResult fr;
    fr.names = {"lambda_c", "fwhm"};
    fr.params = {lambda, lambda / q};
    fr.stderr = {1e-4, 1e-4};
    fr.covariance = {1e-8, 0, 0, 1e-8};
    fr.fixed = {false, false};
    fr.converged = true;
    fr.derived["Q"] = {q, rel_err * q};
    return fr;
}

DeviceRecord device(int i, double lambda, double q, double scaling = 100.0, std::optional<double> dose = {}) {
    DeviceRecord r;
    r.sample_id = "S";
    r.array_id = "A";
    r.device_id = std::to_string(i);
    r.scaling = scaling;
    r.dose = dose;
    r.fits["resonance"] = resonance_fit(lambda, q);
    return r;
}

}  // namespace

TEST_CASE("manifest ingest", "[pipeline]") {
    const auto j = io::json::parse(R"([
      {"sample_id": "S1", "array_id": 3, "device_id": "7", "scaling": 97, "m_w": 4, "dose": 265,
       "trace_paths": {"resonance": "r.csv", "psb": "/abs/psb.csv"}, "flags": {"not_in_reflection": true}},
      {"sample_id": "S1", "array_id": 3, "device_id": "8", "scaling": 97, "m_w": 4, "dose": null,
       "flags": {"visually_broken": true}}
    ])");
    const auto recs = records_from_manifest(j, "/data");
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].array_id == "3");
    CHECK(recs[0].dose.value() == 265.0);
    CHECK(recs[0].trace_paths.at("resonance") == "/data/r.csv");
    CHECK(recs[0].trace_paths.at("psb") == "/abs/psb.csv");
    CHECK(recs[0].flags.not_in_reflection);
    CHECK_FALSE(recs[0].q_eligible());
    CHECK_FALSE(recs[1].dose.has_value());
    CHECK_FALSE(recs[1].has_resonance());

    CHECK_THROWS_AS(records_from_manifest(io::json::object()), SchemaError);
    CHECK_THROWS_AS(records_from_manifest(io::json::parse(R"([{"array_id": 1, "device_id": 1}])")), SchemaError);
    CHECK_THROWS_AS(records_from_manifest(io::json::parse(
                        R"([{"sample_id": 1, "array_id": 1, "device_id": 1, "flags": {"cracked": true}}])")),
                    SchemaError);
    CHECK_THROWS_AS(records_from_manifest(io::json::parse(
                        R"([{"sample_id": 1, "array_id": 1, "device_id": 1}, {"sample_id": 1, "array_id": 1, "device_id": 1}])")),
                    SchemaError);

    SECTION("232 devices") {
        io::json big = io::json::array();
        for (int i = 0; i < 232; ++i) big.push_back({{"sample_id", "S1"}, {"array_id", i / 16}, {"device_id", i % 16}});
        CHECK(records_from_manifest(big).size() == 232);
    }
}

TEST_CASE("batch fitting from files on disk", "[pipeline]") {
    const auto dir = std::filesystem::temp_directory_path() / "cqed_batch_test";
    std::filesystem::create_directories(dir);
    synth::Rng rng(3);
    io::json manifest = io::json::array();
    for (int i = 0; i < 6; ++i) {
        synth::LorentzianSpec s;
        s.center = 618.0 + 0.5 * i;
        s.noise_sd = 4.0;
        const auto name = "dev" + std::to_string(i) + ".csv";
        std::ofstream out(dir / name);
        io::write_trace(out, synth::lorentzian_spectrum(s, rng));
        manifest.push_back({{"sample_id", "S"}, {"array_id", "A"}, {"device_id", i}, {"trace_paths", {{"resonance", name}}}});
    }
    manifest.push_back({{"sample_id", "S"}, {"array_id", "A"}, {"device_id", 99}, {"trace_paths", {{"resonance", "missing.csv"}}}});
    {
        std::ofstream out(dir / "manifest.json");
        out << manifest.dump();
    }
    auto recs = load_manifest((dir / "manifest.json").string());
    BatchOptions opt;
    opt.threads = 3;
    CHECK(batch_fit(recs, opt) == 6);
    for (int i = 0; i < 6; ++i) CHECK(recs[static_cast<std::size_t>(i)].fits.at("resonance")["lambda_c"] == Approx(618.0 + 0.5 * i).margin(1e-3));
    CHECK_FALSE(recs.back().error.empty());
    const auto st = fleet_statistics(recs);
    CHECK(st.q_measured == 6);
    CHECK(st.fit_error == 1);

    auto serial = load_manifest((dir / "manifest.json").string());
    opt.threads = 1;
    batch_fit(serial, opt);
    for (std::size_t i = 0; i < 6; ++i)
        CHECK(to_json(serial[i]).dump() == to_json(recs[i]).dump());
    std::filesystem::remove_all(dir);
}

TEST_CASE("fleet statistics on hand-made batches", "[pipeline]") {
    SECTION("identical fits") {
        std::vector<DeviceRecord> recs;
        for (int i = 0; i < 10; ++i) recs.push_back(device(i, 619.0, 1e4));
        const auto s = fleet_statistics(recs);
        CHECK(s.q_mean == Approx(1e4).epsilon(1e-14));
        CHECK(s.q_std == 0.0);
        CHECK(s.yield == 1.0);
        REQUIRE(s.histogram.size() == 1);
        CHECK(s.histogram[0].count == 10);
    }
    SECTION("categories") {
        std::vector<DeviceRecord> recs;
        for (int i = 0; i < 4; ++i) recs.push_back(device(i, 619.0, 8000 + 1000 * i));
        recs[0].flags.visually_broken = true;
        recs[1].flags.not_in_reflection = true;
        recs.push_back(device(10, 619.0, 40000));  // fwhm 0.0155 nm, below resolution
        DeviceRecord nofit;
        nofit.device_id = "nofit";
        recs.push_back(nofit);
        DeviceRecord failed;
        failed.device_id = "failed";
        failed.error = "NoPeak";
        recs.push_back(failed);
        DeviceRecord noisy = device(12, 619.0, 9000);
        noisy.fits["resonance"].derived["Q"].stderr = 3000;
        recs.push_back(noisy);
        const auto s = fleet_statistics(recs);
        CHECK(s.investigated == 8);
        CHECK(s.visually_broken == 1);
        CHECK(s.with_resonance == 7);
        CHECK(s.not_in_reflection == 1);
        CHECK(s.q_measured == 3);
        CHECK(s.censored == 1);
        CHECK(s.q_count == 2);
        CHECK(s.unfitted == 1);
        CHECK(s.fit_error == 2);
        CHECK(s.q_mean == Approx(10500.0));
        CHECK(s.q_std == Approx(std::sqrt(2.0 * 500.0 * 500.0)));
    }
    SECTION("empty batch") { CHECK_THROWS_AS(fleet_statistics({}), DomainError); }
}

TEST_CASE("fleet statistics properties", "[pipeline][property]") {
    synth::Rng rng(808);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<DeviceRecord> recs;
        const int n = 20 + static_cast<int>(rng.raw() % 40);
        for (int i = 0; i < n; ++i) {
            auto r = device(i, rng.uniform(610, 630), rng.uniform(2000, 45000), 95 + static_cast<double>(rng.raw() % 5),
                            rng.uniform() < 0.5 ? 265.0 : 275.0);
            r.flags.visually_broken = rng.uniform() < 0.1;
            recs.push_back(r);
        }
        const auto base = fleet_statistics(recs);
        // permutation invariance, bitwise
        auto shuffled = recs;
        for (std::size_t i = shuffled.size(); i > 1; --i) std::swap(shuffled[i - 1], shuffled[rng.raw() % i]);
        CHECK(to_json(fleet_statistics(shuffled)).dump() == to_json(base).dump());
        // censored count never decreases as the resolution limit grows
        std::size_t last = 0;
        for (double res : {0.0, 0.005, 0.01, 0.015, 0.021, 0.03, 0.05, 0.1, 1.0}) {
            FleetOptions o;
            o.resolution_nm = res;
            const auto s = fleet_statistics(recs, o);
            CHECK(s.censored >= last);
            CHECK(s.censored + s.q_count == s.q_measured);
            last = s.censored;
        }
    }
}

TEST_CASE("synthetic first-sample batch round trip", "[pipeline]") {
    synth::Rng rng(2024);
    const FleetSpec spec;
    auto fleet = synthetic_fleet(spec, rng);
    REQUIRE(fleet.records.size() == 232);
    batch_fit(fleet.records);
    const auto s = fleet_statistics(fleet.records);
    CHECK(s.investigated == 232);
    CHECK(s.with_resonance == 200);
    CHECK(s.yield == Approx(200.0 / 232.0).epsilon(1e-15));
    CHECK(s.yield_text() == "86.2% (~85%)");
    CHECK(s.q_measured + s.fit_error + s.unfitted == 200 - 27 - 7);
    CHECK(s.fit_error == 0);

    // dose offset at matched scalings, against the same statistic on the generated truth
    std::map<std::pair<double, double>, std::vector<double>> truth;
    for (const auto& r : fleet.records) {
        if (!r.fits.count("resonance")) continue;
        truth[{*r.dose, r.scaling}].push_back(fleet.true_lambda.at(r.key()));
        CHECK(r.fits.at("resonance")["lambda_c"] == Approx(fleet.true_lambda.at(r.key())).margin(2e-3));
    }
    double sum = 0.0;
    int shared = 0;
    for (double sc : spec.scalings) {
        const auto hi = truth.find({spec.dose_high, sc}), lo = truth.find({spec.dose_low, sc});
        if (hi == truth.end() || lo == truth.end()) continue;
        auto mean = [](const std::vector<double>& v) {
            double t = 0;
            for (double x : v) t += x;
            return t / v.size();
        };
        sum += mean(hi->second) - mean(lo->second);
        ++shared;
    }
    REQUIRE(s.dose_offsets.size() == 2);
    CHECK(s.dose_offsets[0].key == spec.dose_low);
    CHECK(s.dose_offsets[0].mean_lambda_nm == 0.0);
    CHECK(s.dose_offsets[1].count == static_cast<std::size_t>(shared));
    CHECK(s.dose_offsets[1].mean_lambda_nm == Approx(sum / shared).margin(1e-3));
    CHECK(s.dose_offsets[1].mean_lambda_nm == Approx(-5.0).margin(0.15));
    REQUIRE(s.per_dose.size() == 2);
    CHECK(s.per_scaling.size() == spec.scalings.size());
    CHECK(s.per_scaling.front().mean_lambda_nm < s.per_scaling.back().mean_lambda_nm);
    CHECK(s.q_mean == Approx(1e4).epsilon(0.15));
}

TEST_CASE("bright and dark classification", "[pipeline]") {
    synth::Rng rng(9);
    synth::LorentzianSpec peak;
    peak.amplitude = 500.0;
    peak.offset = 10.0;
    peak.noise_sd = 1.0;
    CHECK(classify_bright_dark(synth::lorentzian_spectrum(peak, rng)).bright);

    peak.amplitude = 0.0;
    const auto flat = classify_bright_dark(synth::lorentzian_spectrum(peak, rng));
    CHECK_FALSE(flat.bright);
    CHECK_FALSE(flat.low_confidence);

    SampledTrace tie;
    tie.x = {0, 1, 2, 3, 4};
    tie.y = {1, 1, 1, 1, 3};
    CHECK(classify_bright_dark(tie).bright);
    tie.y = {1, 1, 1, 1, 2.999};
    CHECK_FALSE(classify_bright_dark(tie).bright);

    tie.y = {0, 0, 0, 0, 0};
    const auto zero = classify_bright_dark(tie);
    CHECK_FALSE(zero.bright);
    CHECK(zero.low_confidence);
}

TEST_CASE("parameter report", "[pipeline]") {
    ReportInputs in;
    in.set("kappa", 19.0, 0.3, "fit:kappa", "bare");
    in.set("kappa_prime", 28.6, 0.4, "fit:kappa'");
    in.set("kappa_e_over_kappa", 0.210, 0.003, "fit:eta", "refl");
    in.set("tau0", 6.5, 0.2, "fit:tau0", "life");
    in.set("C", 20.6, 1.1, "fit:C", "life");
    in.set("gamma", 0.0975, 0.0044, "fit:gamma", "lw");
    in.set("C_coh", 8.3, 1.2, "fit:C_coh", "lw");
    ReportConstants k;
    k.M_w = 4;
    const auto rep = assemble_report(in, k);

    CHECK(rep["beta"].value == Approx(20.6 / 21.6).epsilon(1e-12));
    CHECK(rep["beta"].stderr == Approx(1.1 / (21.6 * 21.6)).epsilon(1e-6));
    CHECK(rep["beta"].stderr == Approx(0.0024).margin(5e-5));
    CHECK(rep["kappa_e"].value == Approx(3.99).margin(1e-12));
    CHECK(rep["kappa_e"].stderr == Approx(std::hypot(0.003 * 19.0, 0.21 * 0.3)).epsilon(1e-6));
    CHECK(rep["kappa_e"].stderr >= 0.08);
    CHECK(rep["kappa_e"].stderr <= 0.09);
    CHECK(rep["beta0"].value == Approx(0.3648).epsilon(1e-12));
    CHECK(rep["beta0"].stderr == 0.0);
    CHECK(rep["Q"].value == Approx(299792458.0 / 619.0 / 19.0).epsilon(1e-12));
    CHECK(rep["F_p"].value == Approx(3.0 / (4 * M_PI * M_PI) * rep["Q"].value / 0.45).epsilon(1e-12));
    CHECK(rep["F_p"].stderr / rep["F_p"].value == Approx(0.3 / 19.0).epsilon(1e-5));
    CHECK(rep["gamma0"].value == Approx(1.0 / (2 * M_PI * 6.5)).epsilon(1e-12));
    CHECK(rep["g"].value == Approx(0.5 * std::sqrt(8.3 * 19.0 * 0.0975)).epsilon(1e-12));
    CHECK(rep["g_prime"].value == Approx(1.90).epsilon(0.02));
    CHECK(rep["beta_e"].value == Approx(0.21 * 20.6 / 21.6).epsilon(1e-12));
    CHECK(rep["M_w"].value == 4.0);
    CHECK(report_closure_residual(rep) <= 1e-12);

    // independent closure: recompute from the stored rows by hand
    CHECK(std::abs(rep["beta"].value - rep["C"].value / (rep["C"].value + 1)) <= 1e-12);
    CHECK(std::abs(rep["g"].value - 0.5 * std::sqrt(rep["C_coh"].value * rep["kappa"].value * rep["gamma"].value)) <=
          1e-12 * rep["g"].value);

    SECTION("correlation within one fit enters the propagated error") {
        auto corr = in;
        corr.covariance[{"gamma", "C_coh"}] = -0.9 * 0.0044 * 1.2;
        const auto r2 = assemble_report(corr, k);
        const double dg_dc = rep["g"].value / (2 * 8.3), dg_dgam = rep["g"].value / (2 * 0.0975),
                     dg_dk = rep["g"].value / (2 * 19.0);
        const double var = std::pow(dg_dc * 1.2, 2) + std::pow(dg_dgam * 0.0044, 2) + std::pow(dg_dk * 0.3, 2) +
                           2 * dg_dc * dg_dgam * (-0.9 * 0.0044 * 1.2);
        CHECK(r2["g"].stderr == Approx(std::sqrt(var)).epsilon(1e-5));
        CHECK(r2["g"].stderr < rep["g"].stderr);
    }
    SECTION("missing inputs leave rows absent") {
        ReportInputs partial;
        partial.set("C", 20.6, 1.1, "fit:C");
        const auto r3 = assemble_report(partial);
        CHECK(r3["beta"].present);
        CHECK_FALSE(r3["g"].present);
        CHECK_FALSE(r3["kappa"].present);
        CHECK(r3["g"].source.rfind("absent", 0) == 0);
        const auto j = to_json(r3);
        CHECK(j.at("rows").at("g").at("value").is_null());
    }
    SECTION("JSON has every row in table order") {
        const auto j = to_json(rep);
        std::vector<std::string> keys;
        for (const auto& [key, v] : j.at("rows").items()) keys.push_back(key);
        CHECK(keys == report_order());
    }
}

TEST_CASE("report inputs from fit results", "[pipeline]") {
    synth::Rng rng(31);
    std::vector<double> dce;
    for (int i = -6; i <= 6; ++i) dce.push_back(10.0 * i);
    const auto tau = synth::points([](double d) { return purcell_lifetime(6.5, 20.6, d, 28.6); }, dce, 0.0, rng);
    fit::SeriesOptions so;
    so.kappa_stderr = 0.4;
    std::map<std::string, FitResult> fits;
    fits["lifetime_vs_detuning"] = fit::fit_lifetime_vs_detuning(tau.x, tau.y, 28.6, so);
    const auto lw = synth::points([](double d) { return enhanced_rate(0.0975, 8.13, d, 19.0); }, dce, 0.0, rng);
    fits["linewidth_vs_detuning"] = fit::fit_linewidth_vs_detuning(lw.x, lw.y, 19.0);

    const auto in = inputs_from_fits(fits);
    CHECK(in.rows.at("tau0").value == Approx(6.5).epsilon(1e-6));
    CHECK(in.rows.at("kappa_prime").value == 28.6);
    CHECK(in.rows.at("kappa_prime").stderr == 0.4);
    CHECK(in.rows.at("C_coh").group == "linewidth_vs_detuning");
    CHECK(in.covariance.count({"gamma", "C_coh"}) == 1);
    const auto rep = assemble_report(in);
    CHECK(rep["C"].value == Approx(20.6).epsilon(1e-6));
    CHECK(rep["g_prime"].present);
    CHECK_FALSE(rep["g"].present);  // kappa not supplied
    CHECK(rep["gamma"].source == "linewidth_vs_detuning:gamma");
}
