"""planmesh: a service-oriented AI planning system.

Planning capabilities (parsing, converting, solving, validating, managing)
run as stateless services around a hub-and-spoke message broker. Messages
travel as envelopes carrying a correlation id and a routing-slip call
stack; the gateway bridges HTTP clients to the mesh.
"""

__version__ = "0.1.0"
