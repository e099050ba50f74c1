#include "starktune/config.hpp"

namespace starktune {

Session make_session(const Scenario& scenario) {
    Session session(scenario.molecules, scenario.noise, scenario.geometry, scenario.dynamics, scenario.scan,
                    scenario.seed);
    session.set_state(scenario.initial_state);
    return session;
}

std::vector<StepResult> run_scenario(const Scenario& scenario, Execution exec) {
    Session session = make_session(scenario);
    std::vector<StepResult> out;
    for (std::size_t i = 0; i < scenario.actions.size(); ++i) {
        const Action& a = scenario.actions[i];
        StepResult step;
        step.index = i;
        step.kind = a.kind;
        switch (a.kind) {
        case ActionKind::set_voltage: session.set_voltage(a.voltage); break;
        case ActionKind::scan: step.traces = session.scan(a.n_sweeps, exec); break;
        case ActionKind::sweep:
            step.map = session.sweep(a.voltages, exec);
            step.map->molecule_ids = scenario.molecule_ids;
            break;
        case ActionKind::oss: session.oss(a.intensity, a.duration); break;
        case ActionKind::egoss: session.egoss(a.v_bias, a.intensity, a.duration); break;
        case ActionKind::wait: session.wait(a.duration); break;
        }
        step.state = session.state();
        step.clock = session.clock();
        out.push_back(std::move(step));
    }
    return out;
}

} // namespace starktune
