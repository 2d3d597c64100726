vehicle.set("Vehicle.Powertrain.TractionBattery.Charging.ChargeLimit", 80)
soc = vehicle.get("Vehicle.Powertrain.TractionBattery.StateOfCharge.Current")
charging = vehicle.get("Vehicle.Powertrain.TractionBattery.Charging.IsCharging")
if charging and soc >= 80:
    vehicle.set("Vehicle.Powertrain.TractionBattery.Charging.ChargeLimit", soc)
