rain = vehicle.get("Vehicle.Body.RainSensor.Intensity")
if rain == 0:
    mode = "OFF"
elif rain < 30:
    mode = "SLOW"
elif rain < 70:
    mode = "MEDIUM"
else:
    mode = "FAST"
vehicle.set("Vehicle.Body.Windshield.Front.Wiping.Mode", mode)
vehicle.set("Vehicle.Body.Windshield.Front.Wiping.Intensity", rain)
