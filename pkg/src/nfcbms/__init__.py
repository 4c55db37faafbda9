"""Simulated NFC sensor readout for battery modules.

Subpackages map onto the pieces of the readout chain:

* :mod:`nfcbms.frames`   request/response frame codec with CRC-16/X-25
* :mod:`nfcbms.ntag`     passive tag emulation (SRAM, config, signature, I2C bridge)
* :mod:`nfcbms.channel`  distance/voltage field model, discovery, seeded faults
* :mod:`nfcbms.ecc`      secp128r1 arithmetic and ECDSA
* :mod:`nfcbms.auth`     UID allow-list + signature check of battery modules
* :mod:`nfcbms.battery`  14-cell emulator and I2C temperature sensor
* :mod:`nfcbms.ccb`      cell-control-board orchestration and the 162-byte sample
* :mod:`nfcbms.securelog` AES-CBC + CMAC record log
* :mod:`nfcbms.simclock` deterministic clock, latency/power tables, energy ledger
* :mod:`nfcbms.threats`  executable threat scenarios T1..T5
"""

__version__ = "0.1.0"
