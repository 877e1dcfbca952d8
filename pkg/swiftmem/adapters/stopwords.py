# Fixed English stopword list, version 1. Changing it changes offline tags and
# embeddings, so bump STOPWORDS_VERSION alongside any edit.
STOPWORDS_VERSION = 1

STOPWORDS = frozenset(
    """
    a about above after again against all am an and any are as at be because
    been before being below between both but by can could did do does doing
    don down during each few for from further had has have having he her here
    hers herself him himself his how i if in into is it its itself just let me
    more most my myself no nor not now of off on once only or other our ours
    ourselves out over own same she should so some such than that the their
    theirs them themselves then there these they this those through to too
    under until up very was we were what when where which while who whom why
    will with would you your yours yourself yourselves also get got really
    yes yeah oh ok okay well like im ive youre thats dont didnt cant wont
    conversation chat discussion talk message
    """.split()
)
