import pytest
from hypothesis import given
from hypothesis import strategies as st

from nfcbms.battery import (
    SENSOR_ADDRESS,
    BatteryModule,
    I2cBus,
    I2cNack,
    OutOfRange,
    ProfilePoint,
    SensorState,
    TemperatureSensor,
    constant_profile,
    decode_temperature,
    dump_profile,
    encode_temperature,
    i2c_transact,
    load_profile,
    set_profile,
)
from nfcbms.ccb import FLAG_OV, derive_diagnostics


def bus_with_sensor(temp=2550, initialized=True):
    sensor = TemperatureSensor(temperature_centi_C=temp)
    if initialized:
        sensor.state = SensorState.INITIALIZED
    bus = I2cBus()
    bus.attach(SENSOR_ADDRESS, sensor)
    return bus, sensor


def test_read_temperature_registers():
    bus, _ = bus_with_sensor(2550)
    assert i2c_transact(bus, SENSOR_ADDRESS, b"\x01", 2) == b"\x09\xf6"


def test_unused_address_nacks():
    bus, _ = bus_with_sensor()
    with pytest.raises(I2cNack):
        i2c_transact(bus, 0x55, b"", 1)


def test_standby_rejects_measurement():
    bus, _ = bus_with_sensor(initialized=False)
    with pytest.raises(I2cNack):
        i2c_transact(bus, SENSOR_ADDRESS, b"\x00\x2e", 0)
    with pytest.raises(I2cNack):
        i2c_transact(bus, SENSOR_ADDRESS, b"\x01", 2)
    i2c_transact(bus, SENSOR_ADDRESS, b"\x00\x01", 0)
    assert i2c_transact(bus, SENSOR_ADDRESS, b"\x01", 2) == b"\x09\xf6"


@given(st.integers(-4000, 12500))
def test_temperature_encoding_round_trip(t):
    assert decode_temperature(encode_temperature(t)) == t


@given(st.integers(0, 0x7F), st.booleans(), st.integers(0, 7), st.integers(0, 4))
def test_routing_is_total(address, initialized, reg, n):
    bus, _ = bus_with_sensor(initialized=initialized)
    try:
        out = i2c_transact(bus, address, bytes([reg]), n)
    except I2cNack:
        return
    assert len(out) == n


def test_latched_value_survives_later_change():
    bus, sensor = bus_with_sensor(2000)
    i2c_transact(bus, SENSOR_ADDRESS, b"\x00\x2e", 0)
    sensor.temperature_centi_C = 3000
    assert decode_temperature(i2c_transact(bus, SENSOR_ADDRESS, b"\x01", 2)) == 2000


def test_constant_profile():
    m = BatteryModule()
    set_profile(m, constant_profile(3700))
    for t in (0, 1000, 10**7):
        m.advance_to(t)
        assert m.cell_voltages() == [3700] * 14


def test_step_profile():
    m = BatteryModule()
    m.set_profile([ProfilePoint(0, (3600,) * 14, 2500), ProfilePoint(10_000, (3800,) * 14, 3000)])
    m.advance_to(9_999)
    assert m.cell_voltages()[0] == 3600 and m.sensor.temperature_centi_C == 2500
    m.advance_to(10_000)
    assert m.cell_voltages()[0] == 3800 and m.sensor.temperature_centi_C == 3000


def test_fault_profile_needs_flag():
    bad = [ProfilePoint(0, (5000,) + (3700,) * 13, 2500)]
    m = BatteryModule()
    with pytest.raises(OutOfRange):
        m.set_profile(bad)
    m.set_profile(bad, allow_faults=True)
    m.advance_to(0)
    diags, pack = derive_diagnostics(m.cell_voltages(), 2500)
    assert diags[0].fault_flags & FLAG_OV and pack.fault_bitmap & 1


def test_exactly_14_cells():
    with pytest.raises(ValueError):
        BatteryModule(cells=[])
    with pytest.raises(ValueError):
        ProfilePoint(0, (3700,) * 13, 2500)


def test_profile_file_round_trip(tmp_path):
    pts = [ProfilePoint(0.0, tuple(range(3000, 3014)), 2500), ProfilePoint(500.0, (3700,) * 14, -100)]
    (tmp_path / "p.json").write_text(dump_profile(pts))
    assert load_profile(tmp_path / "p.json") == pts
