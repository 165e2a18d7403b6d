import logging
import time
from functools import wraps

from app.services.errors import GraphGameError


logger = logging.getLogger(__name__)


# Activity events are structured log records; the json log format turns `extra` into fields
def publish_event(event: str, activity_id: str, level: int = logging.INFO, data: dict = None):
    payload = {"activity_id": activity_id, "event": event, **(data or {})}
    logger.log(level, f"Activity '{activity_id}' {event}.", extra=payload)
    return payload


def log_activity(activity_id: str, title: str, level="INFO", config_data: dict = None, data: dict = None):
    """
        Helper to record a custom activity line, e.g. a summary of a finished run.
        :param activity_id: name of the running command
        :param title: A human-readable string
        :param level: The level of the log, e.g. DEBUG, INFO, WARNING, ERROR
        :param config_data: The configuration the activity runs with, as a dict
        :param data: Any extra data to be logged as a dict
        :return: The published payload
        """
    return publish_event(
        event=title,
        activity_id=activity_id,
        level=logging.getLevelName(level) if isinstance(level, str) else level,
        data={"config_data": config_data or {}, "data": data or {}},
    )


def activity_logger(on_start=True, on_completion=True, on_error=True):
    """Logs start, completion (with elapsed wall-clock seconds) and failure of the wrapped command."""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            activity_id = func.__name__.replace("command_", "")
            config = kwargs.get("config")
            config_data = config.summary() if hasattr(config, "summary") else {}
            if on_start:
                publish_event(event="started", activity_id=activity_id, data={"config_data": config_data})
            started = time.monotonic()
            try:
                result = func(*args, **kwargs)
            except Exception as e:
                if on_error:
                    data = {"config_data": config_data, "error": str(e), "elapsed": time.monotonic() - started}
                    if isinstance(e, GraphGameError):
                        data["exit_code"] = e.exit_code
                        publish_event(event="failed", activity_id=activity_id, level=logging.ERROR, data=data)
                    else:
                        logger.exception(f"Activity '{activity_id}' failed unexpectedly.", extra=data)
                raise e
            else:
                if on_completion:
                    publish_event(
                        event="complete",
                        activity_id=activity_id,
                        data={"config_data": config_data, "elapsed": time.monotonic() - started},
                    )
                return result
        return wrapper
    return decorator
