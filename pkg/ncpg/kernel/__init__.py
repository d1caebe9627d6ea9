"""Dense operator primitives and the Jordan-Wigner CAR representation."""
