from config.settings import Settings
from imcflab.services.flow_service import FlowService
from imcflab.services.geometry_service import GeometryService
from imcflab.services.isoperimetry_service import IsoperimetryService
from imcflab.services.regsolver_service import RegSolverService


def build_core_services(settings: Settings):
    geometry_service = GeometryService(settings)
    flow_service = FlowService(settings, geometry_service)
    regsolver_service = RegSolverService(settings, geometry_service, flow_service)
    isoperimetry_service = IsoperimetryService(settings, geometry_service, flow_service)

    return {
        "geometry_service": geometry_service,
        "flow_service": flow_service,
        "regsolver_service": regsolver_service,
        "isoperimetry_service": isoperimetry_service,
    }
