import pytest

from d2tforge.schema import StructuredExample, load_schema

# Movie booking layout with explicit padding so the argument indices land
# on 4, 5, 7, 30, 31, 32.
MOVIE_SCHEMA_TEXT = """\
# movie booking arguments
pad 4
arg num_tickets NUMBER CARDINAL
arg theatre STRING ENTITY(Theatre)
pad 1
arg time STRING TIME_OF_DAY
pad 22
arg domain ENUM PLAIN enum WEATHER,TIMERS,SPORTS,GAMES,TRAVEL,MOVIES
arg intent ENUM PLAIN enum CURRENT_TEMP,FORECAST,SET_TIMER,CANCEL_TIMER,GAME_RESULT,NEXT_GAME,BOOK_FLIGHT,FLIGHT_STATUS,TRAFFIC,FIND_SHOWTIME,CONFIRM_BOOKING,NOTIFY_SUCCESS
arg num_slots NUMBER CARDINAL
intent MOVIES.NOTIFY_SUCCESS num_tickets,theatre,time,domain,intent,num_slots
"""


@pytest.fixture(scope="session")
def movie_schema():
    return load_schema(MOVIE_SCHEMA_TEXT)


@pytest.fixture
def movie_example():
    return StructuredExample(
        domain="MOVIES",
        intent="NOTIFY_SUCCESS",
        values={
            "num_tickets": "4",
            "theatre": "Century 16",
            "time": "8:00 pm",
            "domain": "MOVIES",
            "intent": "NOTIFY_SUCCESS",
            "num_slots": "4",
        },
    )
