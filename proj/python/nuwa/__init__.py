from ._nuwa import (
    ConfigError,
    NuwaEnv,
    NuwaError,
    NuwaReceiver,
    ParseError,
    ProtocolError,
    Trace,
    UndefinedError,
    alpha_utility,
    apply_action,
    compute_trend,
    constant_trace,
    fairness,
    fluctuating_trace,
    jain_index,
    load_trace,
    parse_trace,
    reward,
    simulate,
    square_wave_trace,
    sweep_k,
    tanh_fixed,
    tanh_table,
    update_window,
)

__all__ = [
    "ConfigError",
    "NuwaEnv",
    "NuwaError",
    "NuwaReceiver",
    "ParseError",
    "ProtocolError",
    "Trace",
    "UndefinedError",
    "alpha_utility",
    "apply_action",
    "compute_trend",
    "constant_trace",
    "fairness",
    "fluctuating_trace",
    "jain_index",
    "load_trace",
    "parse_trace",
    "reward",
    "simulate",
    "square_wave_trace",
    "sweep_k",
    "tanh_fixed",
    "tanh_table",
    "update_window",
]
