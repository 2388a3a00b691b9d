from strategies.pilot_assignment import PilotAssignment, assign_pilots
from strategies.power_control import PowerAllocation, SelectionReport, cdfpt, dl_sinr, maxmin
