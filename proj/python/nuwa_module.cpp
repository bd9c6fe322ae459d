#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nuwa/error.hpp"
#include "nuwa/experiments.hpp"
#include "nuwa/fixed/tanh.hpp"
#include "nuwa/rl/env.hpp"

namespace py = pybind11;
using namespace nuwa;
using core::SimTime;

namespace {

SimTime us(std::int64_t v) { return SimTime{v}; }
SimTime secs(double s) { return SimTime{static_cast<std::int64_t>(s * 1e6)}; }

netsim::LinkConfig make_link(const core::TraceSchedule& trace, std::int64_t queue, double delay_ms,
                             double loss, std::uint64_t seed) {
  netsim::LinkConfig link;
  link.trace = trace;
  link.queue_capacity = queue;
  link.one_way_prop_delay = link.reverse_path_delay = SimTime{static_cast<std::int64_t>(delay_ms * 1000.0)};
  link.random_loss_rate = loss;
  link.rng_seed = seed;
  return link;
}

cc::ControllerSpec make_spec(const std::string& algo, int k, std::int64_t td_us, std::int64_t rho_us) {
  cc::ControllerSpec spec;
  spec.algo = cc::parse_algo(algo);
  spec.nuwa.k = k;
  spec.nuwa.target_delay_us = td_us;
  spec.nuwa.sensitivity_us = rho_us;
  return spec;
}

py::dict summary_dict(const core::FlowMetrics& m, SimTime duration) {
  const auto s = core::summarize(m, {SimTime{0}, duration});
  py::dict d;
  d["bytes"] = s.bytes;
  d["packets_lost"] = s.packets_lost;
  d["loss_rate"] = s.loss_rate;
  d["mean_queue_delay_us"] = s.mean_queue_delay_us;
  d["max_queue_delay_us"] = s.max_queue_delay_us;
  d["mean_throughput_bps"] = s.mean_throughput_bps;
  d["mean_rtt_us"] = s.mean_rtt_us;
  d["throughput_series_bps"] = m.throughput_series();
  return d;
}

py::dict step_dict(const rl::StepResult& r) {
  py::dict d;
  d["obs"] = r.obs;
  d["reward"] = r.reward ? py::object(py::float_(*r.reward)) : py::object(py::none());
  d["done"] = r.done;
  py::dict info;
  info["b_mbps"] = r.info.b_mbps;
  info["tau_r"] = r.info.tau_r;
  info["tau_l"] = r.info.tau_l;
  info["k"] = r.info.k;
  info["t_ms"] = r.info.t_ms;
  d["info"] = info;
  return d;
}

}  // namespace

PYBIND11_MODULE(_nuwa, m) {
  m.doc() = "Receiver-driven congestion control: estimator, window law and trace-driven simulator";

  py::register_exception<Error>(m, "NuwaError", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<ProtocolError>(m, "ProtocolError", PyExc_RuntimeError);
  py::register_exception<UndefinedError>(m, "UndefinedError", PyExc_ArithmeticError);

  py::class_<core::TraceSchedule>(m, "Trace")
      .def_readonly("opportunities", &core::TraceSchedule::opportunities)
      .def_readonly("duration_ms", &core::TraceSchedule::duration_ms)
      .def("mean_capacity_bps", &core::TraceSchedule::mean_capacity_bps, py::arg("mtu") = core::kDefaultMtu)
      .def("serialize", &core::serialize_trace)
      .def("__len__", [](const core::TraceSchedule& t) { return t.opportunities.size(); });

  m.def("parse_trace", &core::parse_trace, py::arg("text"));
  m.def("load_trace", [](const std::string& p) { return core::load_trace_file(p); }, py::arg("path"));
  m.def("constant_trace", &core::constant_trace, py::arg("mbps"), py::arg("duration_ms"),
        py::arg("mtu") = core::kDefaultMtu);
  m.def("square_wave_trace", &core::square_wave_trace, py::arg("high_mbps"), py::arg("low_mbps"),
        py::arg("half_period_ms"), py::arg("duration_ms"), py::arg("mtu") = core::kDefaultMtu);
  m.def("fluctuating_trace", &core::fluctuating_trace, py::arg("min_mbps"), py::arg("max_mbps"),
        py::arg("segment_ms"), py::arg("duration_ms"), py::arg("seed"), py::arg("mtu") = core::kDefaultMtu);

  m.def("jain_index", [](const std::vector<double>& rates) { return core::jain_index(rates); }, py::arg("rates"));

  m.def("tanh_fixed", [](std::int32_t raw) { return fixed::tanh_fixed(fixed::FixedQ{raw}).raw; }, py::arg("x_q10"),
        "tanh of a Q10 value, returned as Q10");
  m.def("tanh_table", [] { return std::vector<std::int32_t>(fixed::kGoldenTanhTable.begin(), fixed::kGoldenTanhTable.end()); });
  m.def("compute_trend", [](std::int64_t td, std::int64_t qd, std::int64_t rho) {
    return cc::compute_trend(td, qd, rho).raw;
  }, py::arg("target_delay_us"), py::arg("q_delay_us"), py::arg("sensitivity_us"));
  m.def("update_window", [](double w, std::int32_t theta_raw, int k, double w_min, double w_max) {
    return cc::update_window(w, fixed::FixedQ{theta_raw}, k, w_min, w_max);
  }, py::arg("w_old"), py::arg("theta_q10"), py::arg("k"), py::arg("w_min") = 2.0, py::arg("w_max") = 10000.0);

  py::class_<cc::NuwaReceiver>(m, "NuwaReceiver")
      .def(py::init([](int k, std::int64_t td, std::int64_t rho) {
             cc::NuwaParams p;
             p.k = k;
             p.target_delay_us = td;
             p.sensitivity_us = rho;
             p.validate();
             return cc::NuwaReceiver(p);
           }),
           py::arg("k") = 7, py::arg("td_us") = 5000, py::arg("rho_us") = 2500)
      .def("on_packet", [](cc::NuwaReceiver& r, std::int64_t sent_us, std::int64_t recv_us, std::int64_t bytes) {
        const auto u = r.on_packet(us(sent_us), us(recv_us), bytes);
        py::dict d;
        d["d_c_us"] = u.owd.d_c_us;
        d["delta_m_bytes"] = u.owd.delta_m_bytes;
        d["q_delay_us"] = u.owd.q_delay_us;
        d["theta"] = u.theta.to_double();
        d["window"] = u.window;
        d["advertised"] = u.advertised;
        return d;
      }, py::arg("sent_us"), py::arg("received_us"), py::arg("bytes") = core::kDefaultMtu)
      .def_property_readonly("window", &cc::NuwaReceiver::window)
      .def_property_readonly("advertised", &cc::NuwaReceiver::advertised)
      .def("set_k", &cc::NuwaReceiver::set_k, py::arg("k"));

  m.def("simulate", [](const core::TraceSchedule& trace, const std::string& algo, double duration_s, int flows,
                       double stagger_s, int k, std::int64_t td_us, std::int64_t rho_us, std::int64_t queue,
                       double delay_ms, double loss, std::uint64_t seed) {
    const auto link = make_link(trace, queue, delay_ms, loss, seed);
    const auto spec = make_spec(algo, k, td_us, rho_us);
    std::vector<netsim::FlowSpec> specs;
    for (int i = 0; i < flows; ++i) specs.push_back({secs(stagger_s * i), spec});
    const auto duration = secs(duration_s);
    netsim::SimResult res;
    {
      py::gil_scoped_release release;
      res = netsim::run(link, specs, duration);
    }
    py::list out;
    for (const auto& f : res.flows) out.append(summary_dict(f, duration));
    return out;
  }, py::arg("trace"), py::arg("algo") = "nuwa", py::arg("duration_s") = 60.0, py::arg("flows") = 1,
     py::arg("stagger_s") = 0.0, py::arg("k") = 7, py::arg("td_us") = 5000, py::arg("rho_us") = 2500,
     py::arg("queue") = 250, py::arg("delay_ms") = 20.0, py::arg("loss") = 0.0, py::arg("seed") = 1,
     "Runs the flows and returns one summary dict per flow");

  m.def("fairness", [](const std::string& first, const std::string& second, double mbps, int flows_per_algo,
                       double stagger_s, double duration_s, std::int64_t td_us, std::int64_t rho_us,
                       std::int64_t queue) {
    experiments::FairnessConfig cfg;
    cfg.link = make_link(core::constant_trace(mbps, static_cast<std::int64_t>(duration_s * 1000) + 1), queue, 20.0,
                         0.0, 1);
    cfg.first = make_spec(first, 7, td_us, rho_us);
    cfg.second = make_spec(second, 7, td_us, rho_us);
    cfg.flows_per_algo = flows_per_algo;
    cfg.stagger = secs(stagger_s);
    cfg.duration = secs(duration_s);
    experiments::FairnessResult res;
    {
      py::gil_scoped_release release;
      res = experiments::run_fairness(cfg);
    }
    py::dict d;
    d["rate_bps"] = res.rate;
    d["jain"] = res.jain;
    std::vector<std::string> names;
    for (auto a : res.algos) names.emplace_back(cc::algo_name(a));
    d["algos"] = names;
    return d;
  }, py::arg("first") = "nuwa", py::arg("second") = "cubic", py::arg("mbps") = 10.0, py::arg("flows_per_algo") = 2,
     py::arg("stagger_s") = 10.0, py::arg("duration_s") = 60.0, py::arg("td_us") = 64000, py::arg("rho_us") = 32000,
     py::arg("queue") = 250);

  m.def("sweep_k", [](const core::TraceSchedule& trace, double duration_s, std::int64_t td_us, std::int64_t rho_us,
                      std::int64_t queue) {
    const auto link = make_link(trace, queue, 20.0, 0.0, 1);
    std::vector<experiments::SweepRow> rows;
    {
      py::gil_scoped_release release;
      rows = experiments::sweep_k(link, make_spec("nuwa", 7, td_us, rho_us), secs(duration_s));
    }
    py::list out;
    for (const auto& r : rows) {
      py::dict d;
      d["k"] = r.k;
      d["thru_bps"] = r.throughput_bps;
      d["mean_qdelay_us"] = r.mean_queue_delay_us;
      d["max_qdelay_us"] = r.max_queue_delay_us;
      d["lost"] = r.lost;
      d["time_to_track_ms"] = r.time_to_track ? py::object(py::int_(core::to_ms(*r.time_to_track))) : py::object(py::none());
      d["drop_edge_lost"] = r.drop_edge_losses;
      out.append(d);
    }
    return out;
  }, py::arg("trace"), py::arg("duration_s") = 60.0, py::arg("td_us") = 5000, py::arg("rho_us") = 2500,
     py::arg("queue") = 250);

  m.def("alpha_utility", &rl::alpha_utility, py::arg("x"), py::arg("alpha"), py::arg("epsilon_floor") = 1e-6);
  m.def("reward", [](double b, double tau_r, double tau_l) { return rl::reward(b, tau_r, tau_l); }, py::arg("b_mbps"),
        py::arg("tau_r"), py::arg("tau_l"));
  m.def("apply_action", &rl::apply_action, py::arg("k"), py::arg("action"));

  py::class_<rl::NuwaEnv>(m, "NuwaEnv")
      .def(py::init([](const core::TraceSchedule& trace, int k0, std::int64_t td_us, std::int64_t rho_us,
                       std::uint64_t seed, int max_steps) {
             rl::EnvConfig cfg;
             cfg.link.trace = trace;
             cfg.link.rng_seed = seed;
             cfg.nuwa.k = k0;
             cfg.nuwa.target_delay_us = td_us;
             cfg.nuwa.sensitivity_us = rho_us;
             cfg.max_steps = max_steps;
             return std::make_unique<rl::NuwaEnv>(cfg);
           }),
           py::arg("trace"), py::arg("k0") = 7, py::arg("td_us") = 5000, py::arg("rho_us") = 2500, py::arg("seed") = 1,
           py::arg("max_steps") = 800)
      .def("reset", [](rl::NuwaEnv& e) { return step_dict(e.reset()); })
      .def("step", [](rl::NuwaEnv& e, int action) { return step_dict(e.step(action)); }, py::arg("action"))
      .def_property_readonly("k", &rl::NuwaEnv::k)
      .def_property_readonly("steps", &rl::NuwaEnv::steps);
}
