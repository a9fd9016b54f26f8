from .router import include_router  # noqa
