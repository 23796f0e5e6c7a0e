"""Source policies as options: selection, termination and off-policy value learning."""
from .buffer import ReplayBuffer, Transition
from .module import (EpsilonSchedule, OptionModule, OptionNets, SourcePolicy,
                     option_value_upon_arrival, sample_termination,
                     select_option, selects_batch, source_selects,
                     termination_step, update_option_values)


def sync_target(nets):
    """Copy the live option values into the target network."""
    nets.sync_target()


__all__ = [
    "EpsilonSchedule", "OptionModule", "OptionNets", "ReplayBuffer",
    "SourcePolicy", "Transition", "option_value_upon_arrival",
    "sample_termination", "select_option", "selects_batch", "source_selects",
    "sync_target", "termination_step", "update_option_values",
]
