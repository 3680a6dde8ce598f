"""Energy-aware planning for IP-over-elastic-optical networks."""

from importlib import resources
from pathlib import Path

from .auxgraph import Provisioner, build_aux_graph, min_pc_path, provision, replay_order, split_demand
from .baselines import OrderingPolicy, order_demands, plan_gh, plan_sp
from .power import DEFAULT_OPTIONS, PowerCatalog, TransmissionOption
from .qlearning import QLearnConfig, QTable, epsilon, q_update, train
from .state import NetworkState
from .topology import Topology, TrafficDemand, build_topology, generate_traffic, load_topology, load_traffic

__version__ = "0.1.0"


def data_path(name: str) -> Path:
    """Path of a bundled data file, e.g. ``data_path("nkn31.json")``."""
    return Path(str(resources.files(__package__) / "data" / name))


__all__ = [
    "DEFAULT_OPTIONS", "NetworkState", "OrderingPolicy", "PowerCatalog", "Provisioner",
    "QLearnConfig", "QTable", "Topology", "TrafficDemand", "TransmissionOption",
    "build_aux_graph", "build_topology", "data_path", "epsilon", "generate_traffic",
    "load_topology", "load_traffic", "min_pc_path", "order_demands", "plan_gh", "plan_sp",
    "provision", "q_update", "replay_order", "split_demand", "train",
]
