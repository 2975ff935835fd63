#include "vaporqm/atom.hpp"
#include "vaporqm/errors.hpp"
#include "vaporqm/faddeeva.hpp"
#include "vaporqm/filters.hpp"
#include "vaporqm/mbe.hpp"
#include "vaporqm/photon_stats.hpp"
#include "vaporqm/pipeline.hpp"
#include "vaporqm/scenario.hpp"
#include "vaporqm/transitions.hpp"
#include "vaporqm/vapor.hpp"
#include "vaporqm/zeeman.hpp"

#include <pybind11/complex.h>
#include <pybind11/numpy.h>
#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

namespace py = pybind11;
using namespace vqm;

namespace {

py::dict measured(const Measured& m)
{
    py::dict d;
    d["value"] = m.value;
    d["sigma"] = m.sigma;
    return d;
}

py::dict summary_dict(const CountSummary& s)
{
    py::dict d;
    d["n_ret"] = s.n_ret;
    d["n_noise_raw"] = s.n_noise_raw;
    d["offset_per_bin"] = s.offset_per_bin;
    d["roi_bins"] = s.roi_bins;
    d["spurious"] = s.spurious();
    d["n_noise"] = s.n_noise;
    return d;
}

PulseShape pulse_from(const py::array_t<std::complex<double>>& samples, double dt)
{
    PulseShape p;
    p.grid = {0.0, dt, static_cast<std::size_t>(samples.size())};
    auto r = samples.unchecked<1>();
    p.samples.resize(p.grid.size);
    for (py::ssize_t i = 0; i < r.shape(0); ++i)
        p.samples[static_cast<std::size_t>(i)] = r(i);
    return p;
}

py::array_t<std::complex<double>> to_array(const PulseShape& p)
{
    return py::array_t<std::complex<double>>(static_cast<py::ssize_t>(p.samples.size()), p.samples.data());
}

} // namespace

PYBIND11_MODULE(_core, m)
{
    m.doc() = "Bindings for the vaporqm C++ library";
    m.attr("__version__") = toolkit_version();

    py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

    // atomic structure
    m.def(
        "ground_levels",
        [](const std::string& species, double field_tesla) {
            const auto lv = level_structure(load_atom_by_name(species), field_tesla);
            py::list out;
            for (const auto& s : lv.ground) {
                py::dict d;
                d["energy_hz"] = s.energy_hz;
                d["two_mj"] = s.two_mj;
                d["two_mi"] = s.two_mi;
                d["two_mf"] = s.two_mf;
                out.append(d);
            }
            return out;
        },
        py::arg("species"), py::arg("field_tesla"), "Ground-manifold eigenstates sorted by energy.");
    m.def(
        "ground_splitting_hz",
        [](const std::string& species, double field_tesla) {
            const auto atom = load_atom_by_name(species);
            const auto lv = level_structure(atom, field_tesla);
            return find_state(lv.ground, +1, atom.two_i).energy_hz - find_state(lv.ground, -1, atom.two_i).energy_hz;
        },
        py::arg("species"), py::arg("field_tesla"), "Splitting between |mJ=+1/2, mI=I> and |mJ=-1/2, mI=I>.");
    m.def(
        "transition_table",
        [](const std::string& species, double field_tesla, double strength_floor) {
            py::list out;
            for (const auto& l : transition_table(load_atom_by_name(species), field_tesla, {}, strength_floor)) {
                py::dict d;
                d["frequency_offset_hz"] = l.frequency_offset_hz;
                d["dipole_strength"] = l.dipole_strength;
                d["polarization"] = std::string(to_string(l.polarization));
                d["lower"] = py::make_tuple(l.lower.two_mj, l.lower.two_mi);
                d["upper"] = py::make_tuple(l.upper.two_mj, l.upper.two_mi);
                out.append(d);
            }
            return out;
        },
        py::arg("species"), py::arg("field_tesla"), py::arg("strength_floor") = 1e-6);
    m.def(
        "number_density",
        [](const std::string& species, double t, double enrichment, double fraction) {
            return number_density(load_atom_by_name(species), t, enrichment, fraction);
        },
        py::arg("species"), py::arg("temperature_k"), py::arg("enrichment"), py::arg("manifold_fraction") = 1.0,
        "Number density in m^-3.");
    m.def("faddeeva", &faddeeva, py::arg("z"));
    m.def("voigt_profile", &voigt_profile, py::arg("x_hz"), py::arg("sigma_hz"), py::arg("gamma_hz"));

    // memory
    py::enum_<RetrievalDirection>(m, "RetrievalDirection")
        .value("forward", RetrievalDirection::forward)
        .value("backward", RetrievalDirection::backward);
    py::class_<LambdaParams>(m, "LambdaParams")
        .def(py::init<>())
        .def_readwrite("detuning_rad_s", &LambdaParams::detuning_rad_s)
        .def_readwrite("optical_depth", &LambdaParams::optical_depth)
        .def_readwrite("excited_decay_rad_s", &LambdaParams::excited_decay_rad_s)
        .def_readwrite("spinwave_lifetime_s", &LambdaParams::spinwave_lifetime_s)
        .def_readwrite("two_photon_detuning_rad_s", &LambdaParams::two_photon_detuning_rad_s)
        .def_readwrite("retrieval", &LambdaParams::retrieval);
    m.def(
        "store_and_retrieve",
        [](const LambdaParams& params, const py::array_t<std::complex<double>>& signal,
           const py::array_t<std::complex<double>>& control, const py::array_t<std::complex<double>>& readout,
           double dt_s, double hold_time_s, std::size_t z_points) {
            SolverOptions o;
            o.z_points = z_points;
            const auto st = simulate_storage(params, pulse_from(signal, dt_s), pulse_from(control, dt_s), o);
            const auto r = simulate_retrieval(st.fields, params, pulse_from(readout, dt_s), hold_time_s, o);
            py::dict d;
            d["input_photons"] = st.result.input_photons;
            d["eta_storage"] = st.result.eta_storage;
            d["eta_retrieval"] = r.eta_retrieval;
            d["eta_internal_total"] = r.eta_internal_total;
            d["decay_factor"] = r.decay_factor;
            d["leaked"] = to_array(st.result.leaked_pulse);
            d["retrieved"] = to_array(r.retrieved_pulse);
            return d;
        },
        py::arg("params"), py::arg("signal"), py::arg("control"), py::arg("readout"), py::arg("dt_s"),
        py::arg("hold_time_s") = 0.0, py::arg("z_points") = 201,
        "Signal as photon-flux amplitude, controls as Rabi frequency (rad/s), all sampled every dt_s.");

    // filters
    py::class_<EtalonSpec>(m, "EtalonSpec")
        .def(py::init([](double fsr, double fwhm, double peak, double offset) {
                 EtalonSpec e{fsr, fwhm, peak, offset};
                 e.validate();
                 return e;
             }),
             py::arg("fsr_hz") = 71.1e9, py::arg("fwhm_hz") = 1.19e9, py::arg("peak_transmission") = 1.0,
             py::arg("center_offset_hz") = 0.0)
        .def_readonly("fsr_hz", &EtalonSpec::free_spectral_range_hz)
        .def_readonly("fwhm_hz", &EtalonSpec::fwhm_hz)
        .def("finesse", &EtalonSpec::finesse)
        .def("transmission", py::vectorize([](EtalonSpec e, double nu) { return etalon_transmission(e, nu); }));
    m.def("to_db", &to_db);
    m.def("from_db", &from_db);

    // photon statistics
    m.def(
        "count_summary",
        [](double n_ret, double n_noise_raw, double offset_per_bin, double roi_bins) {
            return summary_dict(count_summary(n_ret, n_noise_raw, offset_per_bin, roi_bins));
        },
        py::arg("n_ret"), py::arg("n_noise_raw"), py::arg("offset_per_bin"), py::arg("roi_bins"));
    m.def(
        "figures_of_merit",
        [](double n_ret, double n_noise_raw, double offset_per_bin, double roi_bins, double eta_det_hbt,
           double n_triggers, double alpha_sq) {
            FomInputs in;
            in.eta_det_hbt.value = eta_det_hbt;
            in.alpha_sq.value = alpha_sq;
            in.n_triggers = n_triggers;
            const auto f = figures_of_merit(count_summary(n_ret, n_noise_raw, offset_per_bin, roi_bins), in);
            py::dict d;
            d["snr"] = measured(f.snr);
            d["eta_e2e"] = measured(f.eta_e2e);
            d["mu1"] = f.mu1_defined ? py::object(measured(f.mu1)) : py::none();
            d["warnings"] = f.warnings;
            return d;
        },
        py::arg("n_ret"), py::arg("n_noise_raw"), py::arg("offset_per_bin"), py::arg("roi_bins"),
        py::arg("eta_det_hbt"), py::arg("n_triggers"), py::arg("alpha_sq") = 0.97);
    m.def("eta_det_hbt", &eta_det_hbt, py::arg("alpha_sq"), py::arg("eta_det"));
    m.def("implied_eta_det", &implied_eta_det, py::arg("alpha_sq"), py::arg("hbt"));
    m.def("internal_efficiency", py::overload_cast<double, double, double, double>(&internal_efficiency),
          py::arg("eta_e2e"), py::arg("passive_transmission"), py::arg("hold_time_s"), py::arg("tau_s"));
    m.def(
        "fit_lifetime",
        [](std::vector<double> t, std::vector<double> eff, std::optional<std::vector<double>> unc,
           const std::string& model, double scale) {
            LifetimeSeries s;
            s.hold_time_s = std::move(t);
            s.efficiency = std::move(eff);
            s.uncertainty = unc ? *unc : std::vector<double>(s.hold_time_s.size(), 0.0);
            s.scale_factor = scale;
            const auto f = fit_lifetime(s, parse_decay_model(model));
            py::dict d;
            d["ok"] = f.ok;
            d["message"] = f.message;
            d["amplitude"] = f.amplitude;
            d["time_constant_s"] = f.time_constant_s;
            d["time_constant_sigma_s"] = f.time_constant_sigma_s;
            d["ci95_s"] = py::make_tuple(f.ci_low_s, f.ci_high_s);
            d["chi_squared"] = f.chi_squared;
            d["dof"] = f.dof;
            return d;
        },
        py::arg("hold_time_s"), py::arg("efficiency"), py::arg("uncertainty") = py::none(),
        py::arg("model") = "exponential", py::arg("scale_factor") = 1.0);
    m.def(
        "generate_timetags",
        [](std::vector<double> signal, std::vector<double> noise, double bin_width_s, std::uint64_t n_triggers,
           double eta_det, std::uint64_t seed) {
            const RateProfile s{0.0, bin_width_s, std::move(signal)};
            const RateProfile n{0.0, bin_width_s, std::move(noise)};
            const auto stream = generate_timetags(s, n, n_triggers, eta_det, seed);
            const auto count = static_cast<py::ssize_t>(stream.tags.size());
            py::array_t<std::uint64_t> trig(count);
            py::array_t<std::uint16_t> chan(count);
            py::array_t<std::uint32_t> ts(count);
            auto a = trig.mutable_unchecked<1>();
            auto b = chan.mutable_unchecked<1>();
            auto c = ts.mutable_unchecked<1>();
            for (py::ssize_t i = 0; i < count; ++i) {
                const auto& tag = stream.tags[static_cast<std::size_t>(i)];
                a(i) = tag.trigger_index;
                b(i) = tag.channel;
                c(i) = tag.timestamp_ps;
            }
            return py::make_tuple(trig, chan, ts);
        },
        py::arg("signal"), py::arg("noise"), py::arg("bin_width_s"), py::arg("n_triggers"), py::arg("eta_det"),
        py::arg("seed"), "Photons per trigger per bin in; (trigger_index, channel, timestamp_ps) arrays out.");

    // scenarios and pipeline
    py::class_<ScenarioConfig>(m, "Scenario")
        .def_readonly("name", &ScenarioConfig::name)
        .def("to_json", [](const ScenarioConfig& c) { return c.to_json().dump(2); })
        .def("provenance", [](const ScenarioConfig& c) { return c.provenance.dump(); })
        .def(py::self == py::self)
        .def("save", [](const ScenarioConfig& c, const std::filesystem::path& p) { save_scenario(c, p); });
    m.def("load_scenario", &load_scenario, py::arg("path"));
    m.def(
        "scenario_from_json",
        [](const std::string& text, const std::filesystem::path& base) {
            try {
                return resolve_scenario(nlohmann::json::parse(text, nullptr, true, true), base);
            } catch (const nlohmann::json::parse_error& e) {
                throw ValidationError(e.what());
            }
        },
        py::arg("text"), py::arg("base_dir") = std::filesystem::path{});
    m.def(
        "bundled_scenario", [](const std::string& name) { return load_scenario(bundled_scenario(name)); },
        py::arg("name") = "paper-operating-point");
    m.def(
        "_run_pipeline",
        [](const ScenarioConfig& c, const std::string& stages, const std::string& out) {
            RunRecord rec;
            {
                py::gil_scoped_release release;
                rec = run_pipeline(c, with_dependencies(parse_stages(stages)));
                if (!out.empty())
                    write_run_record(rec, out);
            }
            return rec.document.dump();
        },
        py::arg("scenario"), py::arg("stages"), py::arg("out_dir"));
}
