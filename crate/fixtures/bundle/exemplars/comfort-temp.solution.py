target = 21
cabin_temp = vehicle.get("Vehicle.Cabin.HVAC.AmbientAirTemperature")
if cabin_temp > target:
    vehicle.set("Vehicle.Cabin.HVAC.IsAirConditioningActive", True)
    vehicle.set("Vehicle.Cabin.HVAC.Station.Row1.Left.Temperature", target)
    vehicle.set("Vehicle.Cabin.HVAC.Station.Row1.Right.Temperature", target)
