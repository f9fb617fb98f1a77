from fastapi import HTTPException, status

from ..errors import ConfigError, DataError, PvnextError

_STATUS = {ConfigError: status.HTTP_400_BAD_REQUEST, DataError: status.HTTP_422_UNPROCESSABLE_ENTITY}


def http_error(exc: PvnextError) -> HTTPException:
    for kind, code in _STATUS.items():
        if isinstance(exc, kind):
            return HTTPException(status_code=code, detail={"code": exc.code, "message": exc.message})
    return HTTPException(
        status_code=status.HTTP_500_INTERNAL_SERVER_ERROR, detail={"code": exc.code, "message": exc.message}
    )
