"""Global-control pulse engineering and surface-code unit-cell simulation for
silicon edge-dot spin qubits."""

__version__ = "0.1.0"
