"""Exception types raised by gradsel."""


class GradselError(ValueError):
    """Base class for all library errors."""


class NonBandLimited(GradselError):
    """Deconvolution requested with a kernel whose Fourier transform has unbounded support."""


class GridTooCoarse(GradselError):
    """The grid Nyquist frequency cannot resolve the kernel's frequency band."""


class DivergentNorm(GradselError):
    """The requested L_q norm of a kernel is infinite."""


class EmptyNet(GradselError):
    pass


class InvalidBounds(GradselError):
    pass


class SingularHessian(GradselError):
    pass


class DegenerateCodebook(GradselError):
    """Two centroids coincide, so Voronoi cells are undefined."""


class EmptyCell(GradselError):
    pass


class KTooLargeForExactMatching(GradselError):
    pass


class UnsupportedDimension(GradselError):
    pass


class EmptyWindow(GradselError):
    """Every kernel weight vanishes at the evaluation point."""


class InvalidQ(GradselError):
    pass
