"""From network savings to whole-site savings.

Step through the server optimization ladder on the Clos inventory, showing
how the network's share of site power grows as servers get leaner, then
project what a given transceiver saving is worth for the whole site.

Run:  python3 demos/03_power_projection.py [network_savings]
"""

import sys

from lcdcsim import power

network_savings = float(sys.argv[1]) if len(sys.argv) > 1 else 0.60
clos = power.shipped_inventories()[0]

print(f"{clos.name}: stacked shares at 30% utilization")
print(f"{'bar':28s} " + " ".join(f"{c:>12s}" for c in power.CLASSES))
for label, shares in power.ladder_table(clos, 0.3):
    print(f"{label:28s} " + " ".join(f"{shares[c]:12.1%}" for c in power.CLASSES))

print()
print(f"site-wide savings for {network_savings:.0%} transceiver savings, averaged over designs")
for row in power.savings_table(network_savings):
    print(f"  {row.utilization:.0%} utilization: optics only {row.savings_transceivers:5.1%}, "
          f"optics+PHY+NIC {row.savings_with_phy_nic:5.1%}")
