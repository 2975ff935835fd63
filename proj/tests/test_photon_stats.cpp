#include "vaporqm/errors.hpp"
#include "vaporqm/photon_stats.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

using namespace vqm;

namespace {

const TimeWindow roi{81e-9, 6.48e-9};

double bisect(double alpha_sq, double target)
{
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (2.0 * (1.0 - std::exp(-alpha_sq * mid / 2.0)) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

RateProfile flat(double per_bin, std::size_t bins = 1000, double width = 162e-12)
{
    return {0.0, width, std::vector<double>(bins, per_bin)};
}

} // namespace

TEST_CASE("count arithmetic reproduces the published figures")
{
    const auto s = count_summary(4.46e5, 4.28e4, 183.125, 40.0, roi);
    CHECK(s.spurious() == doctest::Approx(7325.0));
    CHECK(s.n_noise == doctest::Approx(50125.0));
    const auto r = snr(s);
    CHECK(r.value == doctest::Approx(7.898).epsilon(1e-3));
    FomInputs in;
    const auto fom = figures_of_merit(s, in);
    CHECK(fom.eta_e2e.value == doctest::Approx(0.031245).epsilon(1e-3));
    CHECK(fom.mu1.value == doctest::Approx(0.0886).epsilon(2e-3));
    CHECK(fom.eta_e2e.sigma > 0.0);
    CHECK(fom.snr.sigma > 0.0);
}

TEST_CASE("figures of merit edge cases")
{
    const auto equal = count_summary(5e4, 5e4, 0.0, 40.0, roi);
    const auto fom = figures_of_merit(equal, FomInputs{});
    CHECK(fom.snr.value == 0.0);
    CHECK(fom.eta_e2e.value == 0.0);
    CHECK_FALSE(fom.mu1_defined);
    CHECK_FALSE(fom.warnings.empty());
    CHECK(snr(count_summary(2e4, 1e4, 0.0, 40.0, roi)).value == doctest::Approx(1.0));
    CHECK_THROWS_AS(snr(count_summary(10.0, 0.0, 0.0, 40.0, roi)), ValidationError);

    FomInputs doubled;
    doubled.n_triggers *= 2.0;
    const auto s = count_summary(4.46e5, 4.28e4, 183.125, 40.0, roi);
    CHECK(figures_of_merit(s, doubled).eta_e2e.value ==
          doctest::Approx(0.5 * figures_of_merit(s, FomInputs{}).eta_e2e.value).epsilon(1e-12));
    const auto scaled = count_summary(3 * 4.46e5, 3 * 4.28e4, 3 * 183.125, 40.0, roi);
    CHECK(snr(scaled).value == doctest::Approx(snr(s).value).epsilon(1e-12));
}

TEST_CASE("click probability and its inversion")
{
    CHECK(eta_det_hbt(0.0, 0.9) == 0.0);
    CHECK(implied_eta_det(0.97, 0.70) == doctest::Approx(bisect(0.97, 0.70)).epsilon(1e-9));
    CHECK(implied_eta_det(0.97, 0.70) == doctest::Approx(0.888).epsilon(1e-3));
    double last = -1.0;
    for (double a = 0.0; a <= 1.0; a += 0.1) {
        CHECK(eta_det_hbt(a, 0.8) > last);
        CHECK(eta_det_hbt(0.9, a) >= eta_det_hbt(0.9, std::max(0.0, a - 0.1)));
        last = eta_det_hbt(a, 0.8);
    }
    CHECK(eta_det_hbt_out_of_domain(2.0, 0.9));
    CHECK_FALSE(eta_det_hbt_out_of_domain(0.97, 0.888));
}

TEST_CASE("internal efficiency reconstruction")
{
    CHECK(internal_efficiency(0.0312, 0.195, 80e-9, 224e-9) == doctest::Approx(0.0312 / 0.195 * std::exp(80.0 / 224.0)));
    CHECK(internal_efficiency(0.03, 0.2, 0.0, 224e-9) == doctest::Approx(0.15));
    CHECK(internal_efficiency(0.03, 1.0, 80e-9, 224e-9) == doctest::Approx(0.03 * std::exp(80.0 / 224.0)));
    CHECK_THROWS_AS(internal_efficiency(0.03, 0.0, 0.0, 224e-9), ValidationError);
    const auto m = internal_efficiency(Measured{0.0312, 0.0017}, 0.195, 80e-9, 224e-9);
    CHECK(m.sigma / m.value == doctest::Approx(0.0017 / 0.0312));
}

TEST_CASE("histogram basics")
{
    TimeTagStream empty;
    empty.n_triggers = 10;
    const auto h0 = histogram(empty, 1e-9, 0.0, 10e-9);
    CHECK(h0.counts.size() == 10);
    CHECK(h0.total() == 0);

    TimeTagStream s;
    s.n_triggers = 500;
    for (std::uint64_t t = 0; t < s.n_triggers; ++t)
        s.tags.push_back({t, static_cast<std::uint16_t>(t % 2), 3500});
    const auto h = histogram(s, 1e-9, 0.0, 10e-9);
    CHECK(h.counts[3] == 500);
    CHECK(h.total() == 500);
    CHECK(histogram(s, 1e-9, 0.0, 10e-9, {1}).total() == 250);
    CHECK_THROWS_AS(histogram(s, 0.0, 0.0, 10e-9), ValidationError);
    CHECK_THROWS_AS(histogram(s, 3e-9, 0.0, 10e-9), ValidationError);

    const TimeWindow a{0.0, 2e-9}, b{2e-9, 3e-9}, u{0.0, 5e-9};
    CHECK(h.counts_in(a) + h.counts_in(b) == h.counts_in(u));
}

TEST_CASE("generated Poisson streams have the configured per-bin mean")
{
    const double rate = 2e-5;
    const std::uint64_t n = 2000000;
    const auto s = generate_timetags(flat(0.0), flat(rate), n, 1.0, 11);
    const auto h = histogram(s, 162e-12, 0.0, 162e-9);
    const double mean = rate * static_cast<double>(n);
    std::size_t inside = 0;
    for (auto c : h.counts)
        if (std::abs(static_cast<double>(c) - mean) <= 3.0 * std::sqrt(mean))
            ++inside;
    CHECK(static_cast<double>(inside) / static_cast<double>(h.counts.size()) >= 0.95);
    CHECK(generate_timetags(flat(0.0), flat(0.0), n, 1.0, 1).tags.empty());
    CHECK(generate_timetags(flat(rate), flat(rate), n, 0.0, 1).tags.empty());
    const auto again = generate_timetags(flat(0.0), flat(rate), n, 1.0, 11);
    CHECK(again.tags == s.tags);
}

TEST_CASE("corrected noise uses the quiet-region offset")
{
    const std::uint64_t n = 1000000;
    const double width = 162e-12;
    RateProfile noise = flat(1e-6);
    for (std::size_t b = 500; b < 540; ++b)
        noise.photons_per_trigger[b] += 5e-5;
    RateProfile with_offset = noise;
    for (auto& v : with_offset.photons_per_trigger)
        v += 2e-4;
    const auto blk = generate_timetags(flat(0.0), noise, n, 1.0, 3);
    const auto ret = generate_timetags(flat(0.0), with_offset, n, 1.0, 4);
    const auto hb = histogram(blk, width, 0.0, 162e-9);
    const auto hr = histogram(ret, width, 0.0, 162e-9);
    const TimeWindow r{500 * width, 40 * width};
    const TimeWindow quiet{100 * width, 300 * width};
    const auto s = corrected_noise(hr, hb, quiet, r);
    CHECK(s.roi_bins == 40.0);
    CHECK(std::abs(s.offset_per_bin - 200.0) < 4.0 * s.offset_sigma + 1.0);
    CHECK(s.n_noise == doctest::Approx(s.n_noise_raw + s.offset_per_bin * 40.0));
    const auto same = corrected_noise(hb, hb, quiet, r);
    CHECK(same.offset_per_bin == 0.0);
    CHECK(same.n_noise == same.n_noise_raw);
    CHECK_THROWS_AS(corrected_noise(hr, hb, TimeWindow{490 * width, 20 * width}, r), ValidationError);
    CHECK_THROWS_AS(corrected_noise(hr, hb, TimeWindow{0.0, 0.0}, r), ValidationError);
    const auto other = histogram(blk, 2 * width, 0.0, 162e-9);
    CHECK_THROWS_AS(corrected_noise(hr, other, quiet, r), ValidationError);
}

TEST_CASE("closed loop recovers the configured SNR and end-to-end efficiency")
{
    const std::uint64_t n = 18100000;
    const double width = 162e-12;
    const double eta_det = 0.888, alpha_sq = 0.97;
    const double hbt = eta_det_hbt(alpha_sq, eta_det);
    const double e2e = 0.0312;
    const double noise_total = 2.3646e-3, offset = 1.0117e-5;
    RateProfile noise = flat(0.0), sig = flat(0.0), none = flat(0.0);
    for (std::size_t b = 500; b < 540; ++b) {
        noise.photons_per_trigger[b] = noise_total / 40.0 / eta_det;
        sig.photons_per_trigger[b] = e2e * hbt / 40.0 / eta_det;
    }
    RateProfile noisy = noise;
    for (auto& v : noisy.photons_per_trigger)
        v += offset / eta_det;
    const auto ret = generate_timetags(sig, noisy, n, eta_det, 5);
    const auto blk = generate_timetags(none, noise, n, eta_det, 6);
    const TimeWindow r{500 * width, 40 * width};
    const auto s = corrected_noise(histogram(ret, width, 0.0, 162e-9), histogram(blk, width, 0.0, 162e-9),
                                   TimeWindow{100 * width, 300 * width}, r);
    const double n_noise = (noise_total + 40.0 * offset) * static_cast<double>(n);
    const double snr_true = e2e * hbt * static_cast<double>(n) / n_noise;
    const auto measured = snr(s);
    CHECK(std::abs(measured.value - snr_true) < 3.0 * measured.sigma);
    FomInputs in;
    in.eta_det_hbt = {hbt, 0.0};
    in.alpha_sq = {alpha_sq, 0.0};
    in.n_triggers = static_cast<double>(n);
    const auto fom = figures_of_merit(s, in);
    CHECK(std::abs(fom.eta_e2e.value - e2e) < 3.0 * fom.eta_e2e.sigma);
}

TEST_CASE("time-tag files round trip")
{
    const auto dir = std::filesystem::temp_directory_path() / "vqm_tags_test";
    std::filesystem::create_directories(dir);
    const auto s = generate_timetags(flat(1e-3, 100), flat(0.0, 100), 5000, 1.0, 9);
    write_timetags_csv(s, dir / "t.csv");
    write_timetags_binary(s, dir / "t.bin");
    CHECK(read_timetags_csv(dir / "t.csv", s.n_triggers).tags == s.tags);
    const auto b = read_timetags_binary(dir / "t.bin");
    CHECK(b.tags == s.tags);
    CHECK(b.n_triggers == s.n_triggers);
    CHECK(std::filesystem::file_size(dir / "t.bin") == 16 + 16 * s.tags.size());
    std::filesystem::remove_all(dir);
}

TEST_CASE("lifetime fits")
{
    LifetimeSeries s;
    for (double t : {20e-9, 80e-9, 160e-9, 240e-9, 320e-9, 400e-9, 480e-9}) {
        s.hold_time_s.push_back(t);
        s.efficiency.push_back(0.035 * std::exp(-t / 224e-9));
        s.uncertainty.push_back(0.0);
    }
    const auto f = fit_lifetime(s, DecayModel::exponential);
    REQUIRE(f.ok);
    CHECK(f.time_constant_s == doctest::Approx(224e-9).epsilon(1e-9));
    CHECK(f.amplitude == doctest::Approx(0.035).epsilon(1e-9));

    auto scaled = s;
    scaled.scale_factor = 1.13;
    CHECK(fit_lifetime(scaled, DecayModel::exponential).amplitude == doctest::Approx(0.035 * 1.13).epsilon(1e-9));

    auto flat_series = s;
    for (auto& e : flat_series.efficiency)
        e = 0.02;
    CHECK_FALSE(fit_lifetime(flat_series, DecayModel::exponential).ok);

    auto short_series = s;
    short_series.hold_time_s.resize(3);
    short_series.efficiency.resize(3);
    short_series.uncertainty.resize(3);
    CHECK_THROWS_AS(fit_lifetime(short_series, DecayModel::exponential), ValidationError);
}

TEST_CASE("lifetime confidence interval covers the truth and selects the right model")
{
    std::mt19937_64 rng(21);
    std::normal_distribution<double> unit(0.0, 1.0);
    const double tau = 224e-9, a = 0.035, sigma = 0.0008;
    int covered = 0;
    for (int trial = 0; trial < 100; ++trial) {
        LifetimeSeries s;
        for (double t : {20e-9, 80e-9, 160e-9, 240e-9, 320e-9, 400e-9, 480e-9}) {
            s.hold_time_s.push_back(t);
            s.efficiency.push_back(a * std::exp(-t / tau) + sigma * unit(rng));
            s.uncertainty.push_back(sigma);
        }
        const auto f = fit_lifetime(s, DecayModel::exponential);
        if (f.ok && f.ci_low_s <= tau && tau <= f.ci_high_s)
            ++covered;
    }
    CHECK(covered >= 90);

    LifetimeSeries g;
    for (double t : {20e-9, 80e-9, 160e-9, 240e-9, 320e-9, 400e-9, 480e-9}) {
        g.hold_time_s.push_back(t);
        g.efficiency.push_back(a * std::exp(-t * t / (2.0 * 200e-9 * 200e-9)));
        g.uncertainty.push_back(0.0);
    }
    const auto fg = fit_lifetime(g, DecayModel::gaussian);
    const auto fe = fit_lifetime(g, DecayModel::exponential);
    CHECK(fg.chi_squared < fe.chi_squared);
    CHECK(fg.time_constant_s == doctest::Approx(200e-9).epsilon(1e-6));
}
