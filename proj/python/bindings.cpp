#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <complex>
#include <cstring>

#include "ttt/experiment.hpp"
#include "ttt/fft.hpp"
#include "ttt/metrics.hpp"
#include "ttt/mri.hpp"
#include "ttt/ops.hpp"
#include "ttt/phantom.hpp"
#include "ttt/subspace.hpp"
#include "ttt/ttt.hpp"
#include "ttt/unet.hpp"

namespace py = pybind11;
using namespace ttt;

namespace {

using RealArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using ComplexArray = py::array_t<std::complex<float>, py::array::c_style | py::array::forcecast>;

Shape shape_of(const py::array& a) {
    Shape s;
    for (py::ssize_t i = 0; i < a.ndim(); ++i) s.push_back(a.shape(i));
    return s;
}

Tensor<float> real_tensor(const RealArray& a) {
    auto t = Tensor<float>::zeros(shape_of(a));
    std::memcpy(t.values().data(), a.data(), t.values().size() * sizeof(float));
    return t;
}

Tensor<float> complex_tensor(const ComplexArray& a) {
    auto t = Tensor<float>::zeros(shape_of(a), Kind::complex);
    std::memcpy(t.values().data(), a.data(), t.values().size() * sizeof(float));
    return t;
}

py::array to_numpy(const Tensor<float>& t) {
    std::vector<py::ssize_t> shape(t.shape().begin(), t.shape().end());
    if (t.is_complex()) {
        py::array_t<std::complex<float>> out(shape);
        std::memcpy(out.mutable_data(), t.values().data(), t.values().size() * sizeof(float));
        return out;
    }
    py::array_t<float> out(shape);
    std::memcpy(out.mutable_data(), t.values().data(), t.values().size() * sizeof(float));
    return out;
}

py::dict gap_dict(const GapReport& r) {
    py::dict d;
    d["ssim_qq"] = r.ssim_qq;
    d["ssim_pq"] = r.ssim_pq;
    d["ssim_qq_ttt"] = r.ssim_qq_ttt;
    d["ssim_pq_ttt"] = r.ssim_pq_ttt;
    d["gap_before"] = r.gap_before;
    d["gap_after"] = r.gap_after;
    d["fraction_closed"] = r.fraction_closed ? py::cast(*r.fraction_closed) : py::none();
    return d;
}

Measurement<float> make_measurement(const ComplexArray& kspace, const ComplexArray& sens, const SamplingMask& mask,
                                    std::optional<RealArray> reference) {
    Measurement<float> m;
    m.kspace = ops::mask_columns(complex_tensor(kspace), mask.columns);
    m.sens = complex_tensor(sens);
    m.mask = mask;
    if (reference) m.reference = real_tensor(*reference);
    m.id = "python";
    return m;
}

py::list trace_list(const TTTTrace& trace) {
    py::list out;
    for (const auto& e : trace.evals) {
        py::dict d;
        d["iteration"] = e.iteration;
        d["train_loss"] = e.train_loss;
        d["val_loss"] = e.val_loss;
        d["oracle_ssim"] = e.oracle_ssim;
        out.append(d);
    }
    return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Test-time training for accelerated MRI reconstruction";

    py::register_exception<Error>(m, "TTTError", PyExc_RuntimeError);

    m.def("ssim", [](const RealArray& x, const RealArray& ref, double data_range) {
        return ssim(real_tensor(x), real_tensor(ref), data_range);
    }, py::arg("x"), py::arg("ref"), py::arg("data_range") = 1.0);
    m.def("nl1", [](const RealArray& x, const RealArray& ref) { return nl1(real_tensor(x), real_tensor(ref)); },
          py::arg("x"), py::arg("ref"));
    m.def("gap_metrics", [](double qq, double pq, double qq_ttt, double pq_ttt) {
        return gap_dict(gap_metrics(qq, pq, qq_ttt, pq_ttt));
    }, py::arg("ssim_qq"), py::arg("ssim_pq"), py::arg("ssim_qq_ttt"), py::arg("ssim_pq_ttt"));

    m.def("fft2c", [](const ComplexArray& x) { return to_numpy(fft2c(complex_tensor(x))); });
    m.def("ifft2c", [](const ComplexArray& x) { return to_numpy(ifft2c(complex_tensor(x))); });

    py::class_<SamplingMask>(m, "SamplingMask")
        .def_readonly("width", &SamplingMask::width)
        .def_readonly("acs_begin", &SamplingMask::acs_begin)
        .def_readonly("acs_end", &SamplingMask::acs_end)
        .def_readonly("acceleration", &SamplingMask::acceleration)
        .def_property_readonly("columns", [](const SamplingMask& s) {
            return py::array_t<bool>(static_cast<py::ssize_t>(s.columns.size()),
                                     reinterpret_cast<const bool*>(s.columns.data()));
        })
        .def("selected_count", &SamplingMask::selected_count);
    m.def("make_mask", &make_mask, py::arg("width"), py::arg("acceleration"), py::arg("center_fraction"),
          py::arg("seed"));

    m.def("forward", [](const RealArray& image, const ComplexArray& sens, const SamplingMask& mask) {
        return to_numpy(forward(real_tensor(image), complex_tensor(sens), mask));
    }, py::arg("image"), py::arg("sens"), py::arg("mask"));
    m.def("adjoint", [](const ComplexArray& kspace, const ComplexArray& sens, const SamplingMask& mask) {
        return to_numpy(adjoint(complex_tensor(kspace), complex_tensor(sens), mask.columns));
    }, py::arg("kspace"), py::arg("sens"), py::arg("mask"));

    m.def("make_sample", [](const std::string& family, std::int64_t resolution, int n_coils, std::uint64_t seed,
                            std::uint64_t index) {
        PhantomSpec spec;
        spec.family = parse_family(family);
        spec.resolution = resolution;
        spec.n_coils = n_coils;
        spec.seed = seed;
        auto s = make_sample(spec, index);
        py::dict d;
        d["kspace"] = to_numpy(s.kspace_full);
        d["sens"] = to_numpy(s.sens);
        d["reference"] = to_numpy(s.reference);
        d["id"] = s.id;
        return d;
    }, py::arg("family") = "ellipses", py::arg("resolution") = 64, py::arg("n_coils") = 4, py::arg("seed") = 0,
       py::arg("index") = 0);

    py::class_<TTTConfig>(m, "TTTConfig")
        .def(py::init<>())
        .def_readwrite("lr", &TTTConfig::lr)
        .def_readwrite("max_iters", &TTTConfig::max_iters)
        .def_readwrite("val_fraction", &TTTConfig::val_fraction)
        .def_readwrite("patience", &TTTConfig::patience)
        .def_readwrite("seed", &TTTConfig::seed)
        .def_readwrite("early_stop", &TTTConfig::early_stop);

    py::class_<ReconModel>(m, "Model")
        .def_static("init", [](int n_pools, int base_channels, std::uint64_t seed) {
            UNetConfig c;
            c.n_pools = n_pools;
            c.base_channels = base_channels;
            c.seed = seed;
            return unet_init(c);
        }, py::arg("n_pools") = 3, py::arg("base_channels") = 16, py::arg("seed") = 0)
        .def_static("load", [](const std::string& path) { return load_checkpoint(path); })
        .def("save", [](const ReconModel& model, const std::string& path) { save_checkpoint(path, model); })
        .def("param_count", &ReconModel::param_count)
        .def("reconstruct", [](const ReconModel& model, const ComplexArray& kspace, const SamplingMask& mask) {
            return to_numpy(reconstruct(model, adjoint_zf(ops::mask_columns(complex_tensor(kspace), mask.columns), mask)));
        }, py::arg("kspace"), py::arg("mask"))
        .def("reconstruct_ttt", [](const ReconModel& model, const ComplexArray& kspace, const ComplexArray& sens,
                                   const SamplingMask& mask, const TTTConfig& cfg, std::optional<RealArray> reference) {
            auto r = reconstruct_with_ttt(model, make_measurement(kspace, sens, mask, reference), cfg);
            return py::make_tuple(to_numpy(r.image), r.trace.chosen_iteration, trace_list(r.trace));
        }, py::arg("kspace"), py::arg("sens"), py::arg("mask"), py::arg("config") = TTTConfig{},
           py::arg("reference") = py::none());

    auto sub = m.def_submodule("subspace", "Closed forms of the linear subspace model");
    sub.def("run_theory", [](int n, int d, double sigma2, double varsigma2, int n_seeds, int mc_draws,
                             std::uint64_t seed) {
        subspace::TheoryOptions opt;
        opt.n = n;
        opt.d = d;
        opt.sigma2 = sigma2;
        opt.varsigma2 = varsigma2;
        opt.n_seeds = n_seeds;
        opt.mc_draws = mc_draws;
        opt.seed = seed;
        const auto r = subspace::run_theory(opt);
        py::dict out;
        out["alpha_supervised"] = r.mean_alpha_supervised;
        out["alpha_ttt"] = r.mean_alpha_ttt;
        out["alpha_ttt_instance"] = r.mean_alpha_ttt_instance;
        out["risk_q_supervised"] = r.risk_q_supervised;
        out["risk_q_ttt"] = r.risk_q_ttt;
        out["curve_csv"] = r.curve_csv();
        return out;
    }, py::arg("n") = 200, py::arg("d") = 20, py::arg("sigma2") = 1.0, py::arg("varsigma2") = 0.5,
       py::arg("n_seeds") = 5, py::arg("mc_draws") = 100000, py::arg("seed") = 0);
    sub.def("expected_instance_ttt_alpha", &subspace::expected_instance_ttt_alpha, py::arg("d"), py::arg("varsigma2"));
}
