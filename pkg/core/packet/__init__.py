"""Transmissible clone packets.

Modules:
    codec     -- ClonePacket, ModelRef and the PNCP file format
    transfer  -- pack, unpack, attach, detach, repair
"""

from packet.codec import ClonePacket, ModelRef, packet_bytes, packet_from_bytes, read_packet, write_packet
from packet.transfer import attach, detach, load_from_zoo, pack, repair, to_packet, unpack

__all__ = [
    "ClonePacket",
    "ModelRef",
    "attach",
    "detach",
    "load_from_zoo",
    "pack",
    "packet_bytes",
    "packet_from_bytes",
    "read_packet",
    "repair",
    "to_packet",
    "unpack",
    "write_packet",
]
