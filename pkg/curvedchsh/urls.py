"""
URL configuration for the curvedchsh project.

Only the admin is routed; it lists sweep runs recorded with
``manage.py run sweep --record``.
"""
from django.contrib import admin
from django.urls import path


urlpatterns = [
    path('admin/', admin.site.urls),
]
