#include "vaporqm/errors.hpp"
#include "vaporqm/filters.hpp"
#include "vaporqm/physical_constants.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace vqm;

TEST_CASE("airy suppression at half the free spectral range")
{
    const EtalonSpec e{71.1e9, 1.19e9, 1.0, 0.0};
    const double f = e.finesse();
    const double oracle = -10.0 * std::log10(1.0 + std::pow(2.0 * f / constants::pi, 2));
    CHECK(to_db(etalon_transmission(e, 0.5 * e.free_spectral_range_hz)) == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(oracle == doctest::Approx(-31.6).epsilon(0.1 / 31.6));
}

TEST_CASE("etalon transmission is periodic with peaks of the stated width")
{
    const EtalonSpec e{25.8e9, 550e6, 0.9, 3e9};
    CHECK(etalon_transmission(e, 3e9) == doctest::Approx(0.9));
    CHECK(etalon_transmission(e, 3e9 + 2 * e.free_spectral_range_hz) == doctest::Approx(0.9));
    // exact Airy half-maximum detuning
    const double half = e.free_spectral_range_hz / constants::pi *
                        std::asin(1.0 / (2.0 * e.finesse() / constants::pi));
    CHECK(etalon_transmission(e, 3e9 + half) == doctest::Approx(0.45).epsilon(1e-9));
    CHECK(2.0 * half == doctest::Approx(e.fwhm_hz).epsilon(1e-3));
}

TEST_CASE("stacked etalons add in dB")
{
    FilterChain chain;
    chain.broadband.reset();
    chain.etalons = {{71.1e9, 1.19e9, 1.0, 0.0}, {71.1e9, 1.19e9, 1.0, 0.0}, {71.1e9, 1.19e9, 1.0, 0.0}};
    for (double nu : {1e9, 17.3e9, 35.55e9}) {
        double sum_db = 0.0;
        for (const auto& e : chain.etalons)
            sum_db += to_db(etalon_transmission(e, nu));
        CHECK(std::abs(to_db(chain.spectral_transmission(nu)) - sum_db) < 1e-9);
    }
}

TEST_CASE("suppression budget combines polarization and spectral filtering")
{
    FilterChain chain;
    chain.etalons = {{71.1e9, 1.19e9, 1.0, 0.0}};
    chain.broadband = InterferenceFilter{};
    const auto b = control_suppression_budget(chain, 1e10, 35.55e9);
    CHECK(b.polarization_db == doctest::Approx(80.0));
    CHECK(b.spectral_db == doctest::Approx(-to_db(chain.spectral_transmission(35.55e9))));
    CHECK(b.total_db == doctest::Approx(b.polarization_db + b.spectral_db));
    CHECK(b.residual_photons == doctest::Approx(1e10 * from_db(-b.total_db)));
    InterferenceFilter f;
    CHECK(f.transmission(0.0) == doctest::Approx(1.0));
    CHECK(f.transmission(200e9) == doctest::Approx(1e-4));
}

TEST_CASE("chain transmission of a sampled spectrum")
{
    FilterChain chain;
    chain.etalons = {{71.1e9, 1.19e9, 1.0, 0.0}};
    chain.broadband.reset();
    AmplitudeSpectrum s;
    for (int i = -400; i <= 400; ++i) {
        const double nu = i * 10e6;
        s.frequency_hz.push_back(nu);
        s.amplitude.emplace_back(std::exp(-nu * nu / (2 * 300e6 * 300e6)), 0.0);
    }
    const auto out = chain_transmission(chain, s);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < s.frequency_hz.size(); ++i) {
        const double p = std::norm(s.amplitude[i]);
        num += p * etalon_transmission(chain.etalons[0], s.frequency_hz[i]);
        den += p;
    }
    CHECK(out.power_transmission == doctest::Approx(num / den).epsilon(1e-3));
    const auto curve = sample_chain(chain, s.frequency_hz);
    CHECK(chain_transmission(curve, s).power_transmission == doctest::Approx(out.power_transmission));
    auto shifted = curve;
    shifted.frequency_hz[3] += 1e3;
    CHECK_THROWS_AS(chain_transmission(shifted, s), ValidationError);
}

TEST_CASE("filter inputs are validated")
{
    EtalonSpec e{10e9, 20e9, 1.0, 0.0};
    CHECK_THROWS_AS(e.validate(), ValidationError);
    FilterChain chain;
    chain.etalons = {{71.1e9, 1.19e9, 1.5, 0.0}};
    CHECK_THROWS_AS(chain.validate(), ValidationError);
    CHECK_THROWS_AS(passive_transmission(FilterChain{}, 0.0), ValidationError);
    AmplitudeSpectrum s{{0.0, 1.0, 0.5}, {1.0, 1.0, 1.0}};
    CHECK_THROWS_AS(s.validate(), ValidationError);
}

TEST_CASE("spectrum CSV round trip")
{
    const auto dir = std::filesystem::temp_directory_path() / "vqm_filters_test";
    std::filesystem::create_directories(dir);
    AmplitudeSpectrum s{{-1e9, 0.0, 1e9}, {{1.0, 0.5}, {2.0, -0.25}, {0.0, 1.0}}};
    write_amplitude_csv(s, dir / "a.csv");
    const auto back = read_amplitude_csv(dir / "a.csv");
    REQUIRE(back.amplitude.size() == 3);
    CHECK(back.amplitude[1] == s.amplitude[1]);
    write_power_csv({0.0, 1.0}, {0.5, 0.25}, dir / "p.csv");
    CHECK(read_power_csv(dir / "p.csv").transmission[1] == 0.25);
    std::filesystem::remove_all(dir);
}
